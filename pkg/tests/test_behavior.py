from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from swarmpattern.behavior import (
    ALT1,
    ALT2,
    ALT3,
    ALT4,
    BASELINE,
    BEHAVIORS,
    CROSS_RULE_EXCEPTION,
    BehaviorSpec,
    behavior_by_name,
    classify,
    cliques,
    cross_rule_allows,
    derive,
    derive_desired_states,
    derived_from_json,
    filtered_actions,
    is_simplicial,
    safe_actions,
    state_class,
)
from swarmpattern.lattice import ALL_STATES, LatticeError, neighbor_count, shipped_pattern, state_from
from swarmpattern.uniqueness import exemption_candidates

# desired-state words of the shipped patterns, computed with oracles.local_state
FROZEN_DESIRED = {
    "pair": {4, 64},
    "line3": {4, 64, 68},
    "triangle4": {6, 56, 69, 192},
    "triangle9": {6, 56, 62, 71, 125, 192, 197, 199, 248},
    "hexagon6": {10, 36, 66, 72, 132, 160},
}
# states from which no move keeps the old neighbours grouped (oracles.safe_moves)
NO_MOVE_COUNT = 24


@pytest.mark.parametrize("name", sorted(FROZEN_DESIRED))
def test_desired_states_frozen(name):
    pat = shipped_pattern(name)
    assert derive_desired_states(pat) == FROZEN_DESIRED[name]
    assert FROZEN_DESIRED[name] == {oracles.local_state(pat.cells, c) for c in pat.cells}


def test_desired_state_examples():
    assert derive_desired_states([(0, 0), (1, 0)]) == {state_from("E"), state_from("W")}
    assert derive_desired_states([(0, 0), (1, 0), (2, 0)]) == {state_from("E"), state_from("E", "W"),
                                                               state_from("W")}
    tri = [(0, 0), (1, 0), (2, 0), (1, 1)]
    assert state_from("E", "NE") in derive_desired_states(tri)
    with pytest.raises(LatticeError):
        derive_desired_states([(0, 0)])
    with pytest.raises(LatticeError):
        derive_desired_states([(0, 0), (3, 0)])


def test_safe_action_examples():
    assert safe_actions(state_from("N")) == (1, 2, 6, 7)  # NE, E, W, NW
    assert safe_actions(0xFF) == ()
    assert safe_actions(state_from("N", "S")) == (2, 6)
    assert 7 not in safe_actions(state_from("E"))


def test_safe_actions_equal_oracle_on_every_state():
    for s in ALL_STATES:
        assert list(safe_actions(s)) == oracles.safe_moves(s), s
    assert sum(1 for s in ALL_STATES if not safe_actions(s)) == NO_MOVE_COUNT


@given(st.integers(1, 255))
def test_safe_actions_never_collide_or_split(s):
    nbrs = oracles.neighbours_of(s)
    for d in safe_actions(s):
        assert not s >> d & 1
        assert oracles.connected(nbrs + [oracles.CELLS[d]])


def _cross_oracle(s, d):
    known = set(oracles.neighbours_of(s)) | {oracles.CELLS[d]}
    return all(any((x + a, y + b) in known for a, b in ((0, 1), (1, 0), (0, -1), (-1, 0)))
               for x, y in known)


@given(st.integers(1, 255))
def test_cross_rule_matches_oracle(s):
    for d in safe_actions(s):
        assert cross_rule_allows(s, d) == _cross_oracle(s, d)
    if s == CROSS_RULE_EXCEPTION:
        assert filtered_actions(s, ALT3) == safe_actions(s)


def test_cross_rule_exemption_is_rederived():
    pats = [shipped_pattern(n) for n in ("triangle4", "triangle9", "hexagon6")]
    cands = exemption_candidates(pats, [ALT3, ALT4])
    assert cands and cands[0] == CROSS_RULE_EXCEPTION == state_from("N", "E", "W")


def test_cliques_and_simplicial():
    assert len(cliques(state_from("N", "S"))) == 2
    assert len(cliques(state_from("N", "NE", "E"))) == 1
    assert len(cliques(0xFF)) == 1 and not is_simplicial(0xFF)
    assert is_simplicial(state_from("E"))
    assert not is_simplicial(state_from("N", "S"))


def test_partition_baseline_triangle4():
    db = derive(shipped_pattern("triangle4"), BASELINE)
    sets = db.sets
    assert 0xFF in sets.s_blocked
    assert state_from("E") in sets.s_active
    assert len(sets.s_blocked) == NO_MOVE_COUNT
    assert len(sets.s_static) == 28 and len(sets.s_active) == 227
    assert set(db.q) == sets.s_active
    assert not set(db.q) & sets.s_des


@pytest.mark.parametrize("spec,limit", [(ALT2, 5), (ALT4, 4)])
def test_neighbour_threshold_blocking(spec, limit):
    db = derive(shipped_pattern("triangle9"), spec)
    heavy = {s for s in ALL_STATES if neighbor_count(s) > limit}
    assert heavy - db.sets.s_des <= db.sets.s_blocked
    no_move = {s for s in ALL_STATES if not oracles.safe_moves(s)}
    expected = (heavy | no_move) - db.sets.s_des
    if spec.cross_rule:
        # the cross rule can strip every move from further states
        assert expected <= db.sets.s_blocked
        assert all(not filtered_actions(s, spec) for s in db.sets.s_blocked - expected)
    else:
        assert db.sets.s_blocked == expected


@given(st.sets(st.integers(1, 255), min_size=1, max_size=20), st.sets(st.integers(1, 255), max_size=40))
def test_partition_invariants(des, extra):
    sets = classify(des, extra_blocked=extra)
    assert sets.s_static == sets.s_des | sets.s_blocked
    assert sets.s_active == set(ALL_STATES) - sets.s_static
    assert not sets.s_blocked & sets.s_simplicial
    assert (set(extra) - set(des)) <= sets.s_blocked
    for s in ALL_STATES:
        assert state_class(sets, s) in ("desired", "blocked", "active")


def test_alt1_differs_only_in_repeat_flag():
    a = derive(shipped_pattern("triangle9"), BASELINE)
    b = derive(shipped_pattern("triangle9"), ALT1)
    assert a.q == b.q and a.sets == b.sets
    assert b.spec.no_repeat and not a.spec.no_repeat


def test_cross_rule_only_removes_moves():
    for s, acts in derive(shipped_pattern("triangle9"), ALT3).q.items():
        assert set(acts) <= set(safe_actions(s))


def test_behavior_lookup_and_bundle_roundtrip():
    assert behavior_by_name("alt4") is ALT4
    with pytest.raises(KeyError):
        behavior_by_name("ALT9")
    assert set(BEHAVIORS) == {"Baseline", "ALT1", "ALT2", "ALT3", "ALT4"}
    for spec in BEHAVIORS.values():
        db = derive(shipped_pattern("hexagon6"), spec)
        back = derived_from_json(json.loads(json.dumps(db.to_json())))
        assert back.sets == db.sets and dict(back.q) == dict(db.q) and back.spec == db.spec
    assert BehaviorSpec.from_json({}) == BehaviorSpec("custom")
