from __future__ import annotations

import itertools
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from swarmpattern.behavior import ALT2, BASELINE, BEHAVIORS, classify, derive
from swarmpattern.lattice import pattern_states, shipped_pattern, state_from, states_match
from swarmpattern.uniqueness import (
    Inconclusive,
    OutcomeTag,
    build_matrices,
    check_uniqueness,
    classify_outcome,
    completeness_test,
    count_combinations,
    lattice_animals,
    matching_test,
    oracle_all_static_patterns,
    search_patterns,
    viable_states,
)

E, W = state_from("E"), state_from("W")
PAIR = frozenset({(0, 0), (1, 0)})
# two {N} agents whose only possible northern partner is a single {S,SW}
SOLE_PARTNER_COMBO = (state_from("N"), state_from("N"), state_from("NE", "S"), state_from("S", "SW"))


def test_matrices_for_pair():
    m, d = build_matrices([E, W])
    assert m.tolist() == [[0, 1], [1, 0]]
    assert d[0][1] == (2,) and d[1][0] == (6,)


@given(st.lists(st.integers(1, 255), min_size=1, max_size=8, unique=True))
def test_matrix_symmetry(states):
    m, _ = build_matrices(states)
    assert (m == m.T).all()
    for i, s in enumerate(states):
        if not any(s >> u & 1 and s >> ((u + 4) % 8) & 1 for u in range(8)):
            assert m[i, i] == 0


def test_combination_counts():
    assert count_combinations(4, 5) == 56
    assert count_combinations(1, 7) == 1
    assert count_combinations(2, 3) == 4
    for n_s in range(1, 8):
        for n in range(1, 8):
            assert count_combinations(n_s, n) == sum(
                1 for _ in itertools.combinations_with_replacement(range(n_s), n))


def test_completeness_examples():
    assert completeness_test([E, W])
    assert not completeness_test([E, E])
    ns = state_from("N", "S")
    assert not completeness_test([ns] * 4)


def test_matching_examples():
    assert matching_test([E, W])
    assert completeness_test(SOLE_PARTNER_COMBO)
    assert not matching_test(SOLE_PARTNER_COMBO)
    n = state_from("N")
    partners = [t for t in set(SOLE_PARTNER_COMBO) if states_match(n, t, 0)]
    assert len(partners) == 1 and Counter(SOLE_PARTNER_COMBO)[partners[0]] == 1
    # no four-agent pattern has this multiset of states
    assert not any(Counter(pattern_states(a).values()) == Counter(SOLE_PARTNER_COMBO)
                   for a in lattice_animals(4))
    # a state with a link nobody can serve
    assert not matching_test([state_from("N", "NE"), W])


@settings(max_examples=200)
@given(st.integers(2, 6), st.data())
def test_filters_never_reject_a_real_pattern(n, data):
    animal = data.draw(st.sampled_from(lattice_animals(n)))
    combo = list(pattern_states(animal).values())
    assert completeness_test(combo)
    assert matching_test(combo)
    pats, _ = search_patterns(combo, n)
    assert animal in pats


def test_search_examples():
    assert search_patterns([E, W], 2)[0] == [PAIR]
    t4 = shipped_pattern("triangle4")
    combo = sorted(pattern_states(t4.cells).values())
    assert search_patterns(combo, 4)[0] == [t4.cells]
    with pytest.raises(ValueError):
        search_patterns([E], 2)


def test_search_budget():
    db = derive(shipped_pattern("triangle9"), BASELINE)
    with pytest.raises(Inconclusive):
        check_uniqueness(db.sets, 9, db.pattern.cells, mode="direct", node_limit=10)


def test_outcome_classes():
    pair = derive(shipped_pattern("pair"), BASELINE)
    assert check_uniqueness(pair.sets, 2, PAIR).tag is OutcomeTag.DESIRED_UNIQUE
    lonely = classify({state_from("N")})
    vertical = frozenset({(0, 0), (0, 1)})
    assert check_uniqueness(lonely, 2, vertical).tag is OutcomeTag.NO_PATTERN
    assert classify_outcome([PAIR], vertical) is OutcomeTag.ONLY_UNDESIRED
    assert classify_outcome([PAIR, vertical], vertical) is OutcomeTag.DESIRED_NOT_UNIQUE


@pytest.mark.parametrize("name", ["pair", "line3", "triangle4", "hexagon6", "triangle9"])
def test_shipped_patterns_are_unique_under_every_behaviour(name):
    pat = shipped_pattern(name)
    for spec in BEHAVIORS.values():
        db = derive(pat, spec)
        assert check_uniqueness(db.sets, pat.size, pat.cells).unique, spec.name


@pytest.mark.parametrize("name,spec", [("pair", "ALT4"), ("line3", "ALT3"), ("triangle4", "Baseline"),
                                       ("hexagon6", "ALT1")])
def test_modes_agree(name, spec):
    pat = shipped_pattern(name)
    db = derive(pat, BEHAVIORS[spec])
    a = check_uniqueness(db.sets, pat.size, pat.cells, mode="combinations")
    b = check_uniqueness(db.sets, pat.size, pat.cells, mode="direct")
    assert a.patterns_found == b.patterns_found
    assert b.stats["filter_violations"] == 0


def test_oracle_examples():
    assert oracle_all_static_patterns({E, W}, 2) == [PAIR]
    line = [(0, 0), (1, 0), (2, 0)]
    found = oracle_all_static_patterns({oracles.local_state(line, c) for c in line}, 3)
    assert found == [frozenset(line)]
    t4 = derive(shipped_pattern("triangle4"), ALT2)
    assert oracle_all_static_patterns(t4.sets, 4) == check_uniqueness(t4.sets, 4, t4.pattern.cells).patterns_found
    with pytest.raises(ValueError):
        oracle_all_static_patterns({E}, 9)


def test_package_oracle_equals_subset_oracle():
    rng = random.Random(7)
    for n in (2, 3, 4, 5):
        animals = oracles.animals_by_subsets(n)
        assert set(lattice_animals(n)) == animals
        assert len(animals) == oracles.FIXED_POLYPLETS[n]
        for _ in range(15):
            animal = rng.choice(sorted(animals, key=sorted))
            static = set(pattern_states(animal).values()) | set(rng.sample(range(1, 256), rng.randint(0, 60)))
            expected = {a for a in animals if all(oracles.local_state(a, c) in static for c in a)}
            assert set(oracle_all_static_patterns(static, n)) == expected
    assert len(lattice_animals(6)) == oracles.FIXED_POLYPLETS[6]


def test_viable_states_drop_unservable_links():
    assert viable_states([E, W]) == sorted([E, W])
    assert viable_states([E]) == []
    assert set(viable_states([E, W, state_from("N", "NE")])) == {E, W}
