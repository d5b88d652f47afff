"""Is the desired pattern the only configuration in which every agent is static?

The pipeline filters multisets ("combinations") of static states with cheap
counting tests and then places the surviving state instances on the lattice.
Placement is a depth-first search that grows a spanning tree from the lowest,
then left-most agent; every placed agent's state fixes the occupancy of its
eight surrounding cells, so a finished placement has no loose ends.

``oracle_all_static_patterns`` answers the same question by brute force and is
kept independent of the search code.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .behavior import StateSets
from .lattice import (
    DIRECTIONS,
    OFFSETS,
    Cell,
    Pattern,
    canonicalize,
    moore,
    opposite,
    pattern_states,
    states_match,
)


class Inconclusive(RuntimeError):
    """Search budget exhausted before the answer was known."""


class OutcomeTag(str, Enum):
    NO_PATTERN = "NoPattern"
    ONLY_UNDESIRED = "OnlyUndesired"
    DESIRED_NOT_UNIQUE = "DesiredPossibleNotUnique"
    DESIRED_UNIQUE = "DesiredUnique"


@dataclass
class Outcome:
    tag: OutcomeTag
    patterns_found: list[Pattern]
    stats: dict = field(default_factory=dict)

    @property
    def unique(self) -> bool:
        return self.tag is OutcomeTag.DESIRED_UNIQUE

    def to_json(self) -> dict:
        return {
            "outcome": self.tag.value,
            "patterns_found": [sorted(list(c) for c in p) for p in self.patterns_found],
            "stats": self.stats,
        }


def classify_outcome(found: Iterable[Pattern], p_des: Pattern) -> OutcomeTag:
    found = set(found)
    if not found:
        return OutcomeTag.NO_PATTERN
    if p_des not in found:
        return OutcomeTag.ONLY_UNDESIRED
    if len(found) > 1:
        return OutcomeTag.DESIRED_NOT_UNIQUE
    return OutcomeTag.DESIRED_UNIQUE


# ---------------------------------------------------------------------------
# match / link-direction matrices


def build_matrices(states: Sequence[int]) -> tuple[np.ndarray, list[list[tuple[int, ...]]]]:
    """Match-count matrix ``m`` and link-direction matrix ``d`` over ``states``."""
    states = list(states)
    if not states:
        raise ValueError("need at least one state")
    k = len(states)
    m = np.zeros((k, k), dtype=np.int64)
    d: list[list[tuple[int, ...]]] = [[() for _ in range(k)] for _ in range(k)]
    for i, si in enumerate(states):
        for j, sj in enumerate(states):
            links = tuple(u for u in DIRECTIONS if states_match(si, sj, u))
            d[i][j] = links
            m[i, j] = len(links)
    return m, d


def count_combinations(n_s: int, n: int) -> int:
    """Number of size-``n`` multisets over ``n_s`` states (exact integer)."""
    if n_s < 1 or n < 1:
        raise ValueError("n_s and n must be positive")
    return math.comb(n_s + n - 1, n)


def viable_states(states: Iterable[int]) -> list[int]:
    """Drop states with some link that no remaining state can match, to a fixpoint."""
    pool = set(states)
    changed = True
    while changed:
        changed = False
        for s in sorted(pool):
            for u in DIRECTIONS:
                if s >> u & 1 and not any(states_match(s, t, u) for t in pool):
                    pool.discard(s)
                    changed = True
                    break
    return sorted(pool)


# ---------------------------------------------------------------------------
# combination tests


def completeness_test(combo: Sequence[int]) -> bool:
    """Link pairing per direction, finiteness and existence of edges."""
    link_count = [0] * 8
    for s in combo:
        for u in DIRECTIONS:
            if s >> u & 1:
                link_count[u] += 1
    for u in range(4):
        if link_count[u] != link_count[opposite(u)]:
            return False
    for u in DIRECTIONS:
        if all(s >> u & 1 for s in combo):
            return False
    for u in DIRECTIONS:
        if link_count[u] and not any(s >> u & 1 and not s >> opposite(u) & 1 for s in combo):
            return False
    return True


def matching_test(combo: Sequence[int]) -> bool:
    """Supply check: every link of every instance needs a distinct matching partner.

    An agent has exactly one neighbour along each of its links and that
    neighbour's opposite link points back at it, so the instances able to
    serve along ``u`` must be at least as many as the instances needing them.
    """
    counts = Counter(combo)
    kinds = list(counts)
    for s in kinds:
        for u in DIRECTIONS:
            if not s >> u & 1:
                continue
            partners = [t for t in kinds if states_match(s, t, u)]
            if not partners:
                return False
            if s in partners:
                # a chain of s along u must end on some other partner
                if not any(t != s for t in partners):
                    return False
            elif sum(counts[t] for t in partners) < counts[s]:
                return False
    return True


# ---------------------------------------------------------------------------
# placement search

_ROOT_FORBIDDEN = sum(1 << d for d, (dx, dy) in enumerate(OFFSETS) if dy < 0 or (dy == 0 and dx < 0))


def _before_root(c: Cell) -> bool:
    return c[1] < 0 or (c[1] == 0 and c[0] < 0)


class _Placement:
    """Depth-first placement of state instances; each finished placement is one pattern."""

    def __init__(self, states: Sequence[int], n: int, counts: Counter | None, node_limit: int):
        self.states = tuple(sorted(set(states)))
        self.n = n
        self.counts = counts
        self.node_limit = node_limit
        self.nodes = 0
        self.pruned = Counter()
        self.found: list[Pattern] = []
        self.placed: dict[Cell, int] = {}
        self.known: dict[Cell, bool] = {}
        self.open: set[Cell] = set()
        self._added_stack: list[list[Cell]] = []

    def run(self) -> list[Pattern]:
        for s in self.states:
            if s & _ROOT_FORBIDDEN:
                continue
            if self.counts is not None and not self.counts[s]:
                continue
            self.known[(0, 0)] = True
            self._place((0, 0), s)
            self._recurse()
            self._unplace((0, 0), s)
            del self.known[(0, 0)]
        return self.found

    def _place(self, c: Cell, s: int) -> list[Cell]:
        self.placed[c] = s
        self.open.discard(c)
        if self.counts is not None:
            self.counts[s] -= 1
        added = []
        x, y = c
        for d, (dx, dy) in enumerate(OFFSETS):
            cell = (x + dx, y + dy)
            if cell not in self.known:
                occ = bool(s >> d & 1)
                self.known[cell] = occ
                added.append(cell)
                if occ:
                    self.open.add(cell)
        self._added_stack.append(added)
        return added

    def _unplace(self, c: Cell, s: int) -> None:
        for cell in self._added_stack.pop():
            del self.known[cell]
            self.open.discard(cell)
        del self.placed[c]
        self.open.add(c)
        if self.counts is not None:
            self.counts[s] += 1
        if c == (0, 0):
            self.open.discard(c)

    def _candidates(self, c: Cell) -> list[int]:
        must, must_not, edge_mask = 0, 0, 0
        x, y = c
        for d, (dx, dy) in enumerate(OFFSETS):
            cell = (x + dx, y + dy)
            if _before_root(cell):
                must_not |= 1 << d
                continue
            occ = self.known.get(cell)
            if occ is True:
                must |= 1 << d
                if cell in self.placed:
                    edge_mask |= 1 << d
            elif occ is False:
                must_not |= 1 << d
        out = []
        for s in self.states:
            if self.counts is not None and not self.counts[s]:
                self.pruned["degree"] += 1
                continue
            if s & edge_mask != edge_mask:
                self.pruned["graph_edge"] += 1
                continue
            if s & must != must or s & must_not:
                self.pruned["spatial"] += 1
                continue
            out.append(s)
        return out

    def _recurse(self) -> None:
        self.nodes += 1
        if self.nodes > self.node_limit:
            raise Inconclusive(f"placement search exceeded {self.node_limit} nodes")
        if len(self.placed) + len(self.open) > self.n:
            self.pruned["degree"] += 1
            return
        if not self.open:
            if len(self.placed) == self.n:
                self.found.append(canonicalize(self.placed))
            else:
                self.pruned["connectivity"] += 1
            return
        c = min(self.open, key=lambda p: (p[1], p[0]))
        for s in self._candidates(c):
            self._place(c, s)
            self._recurse()
            self._unplace(c, s)


def search_patterns(combo: Sequence[int] | None, n: int, states: Sequence[int] | None = None,
                    limit: int = 10**8) -> tuple[list[Pattern], dict]:
    """All patterns realising ``combo`` exactly (or, with ``combo=None``, any
    ``n`` instances drawn from ``states``).  Raises :class:`Inconclusive` past ``limit`` nodes."""
    if combo is not None:
        if len(combo) != n:
            raise ValueError("combination size must equal n")
        counts = Counter(combo)
        pool = sorted(counts)
    else:
        counts = None
        pool = sorted(set(states or ()))
    search = _Placement(pool, n, counts, limit)
    found = search.run()
    return sorted(set(found), key=sorted), {"nodes": search.nodes, "pruned": dict(search.pruned)}


def check_uniqueness(sets: StateSets, n: int, p_des: Pattern, *, mode: str = "auto",
                     combination_limit: int = 200_000, node_limit: int = 10**8,
                     stop_on_counterexample: bool = False) -> Outcome:
    """Classify ``p_des`` among the four outcomes for a swarm of ``n`` agents.

    ``mode="combinations"`` walks every multiset of viable static states through
    the completeness and matching tests before placement; ``mode="direct"`` runs
    a single placement search with unlimited multiplicities, which covers the
    same multisets without listing them.  ``auto`` picks combinations while their
    number stays under ``combination_limit``.
    """
    p_des = canonicalize(p_des)
    if len(p_des) != n:
        raise ValueError("desired pattern size differs from n")
    static = sorted(sets.s_static)
    pool = viable_states(static)
    stats: dict = {
        "n": n,
        "static_states": len(static),
        "viable_states": len(pool),
        "combinations_total": count_combinations(len(static), n) if static else 0,
        "combinations_viable": count_combinations(len(pool), n) if pool else 0,
    }
    if not pool:
        stats["mode"] = "trivial"
        return Outcome(OutcomeTag.NO_PATTERN, [], stats)
    if mode == "auto":
        mode = "combinations" if stats["combinations_viable"] <= combination_limit else "direct"
    stats["mode"] = mode
    found: set[Pattern] = set()
    pruned = Counter()
    nodes = 0
    if mode == "combinations":
        if stats["combinations_viable"] > combination_limit:
            raise Inconclusive(f"{stats['combinations_viable']} combinations exceed the budget")
        tested = passed_completeness = passed_matching = 0
        for combo in itertools.combinations_with_replacement(pool, n):
            tested += 1
            if not completeness_test(combo):
                continue
            passed_completeness += 1
            if not matching_test(combo):
                continue
            passed_matching += 1
            pats, st = search_patterns(combo, n, limit=node_limit - nodes)
            nodes += st["nodes"]
            pruned.update(st["pruned"])
            found.update(pats)
            if stop_on_counterexample and any(p != p_des for p in found):
                break
        stats.update(combinations_tested=tested, passed_completeness=passed_completeness,
                     passed_matching=passed_matching)
    elif mode == "direct":
        pats, st = search_patterns(None, n, states=pool, limit=node_limit)
        nodes = st["nodes"]
        pruned.update(st["pruned"])
        found.update(pats)
        # every realised multiset must survive the combination tests
        stats["filter_violations"] = sum(
            1 for p in pats
            if not (completeness_test(list(pattern_states(p).values()))
                    and matching_test(list(pattern_states(p).values())))
        )
    else:
        raise ValueError(f"unknown mode {mode!r}")
    stats["search_nodes"] = nodes
    stats["pruning"] = dict(pruned)
    ordered = sorted(found, key=lambda p: (p != p_des, sorted(p)))
    return Outcome(classify_outcome(found, p_des), ordered, stats)


# ---------------------------------------------------------------------------
# brute-force oracle

ORACLE_MAX_N = 8


@lru_cache(maxsize=None)
def lattice_animals(n: int) -> tuple[Pattern, ...]:
    """All Moore-connected ``n``-cell sets up to translation (fixed polyplets)."""
    if n < 1:
        raise ValueError("n must be positive")
    if n == 1:
        return (frozenset({(0, 0)}),)
    out = set()
    for animal in lattice_animals(n - 1):
        frontier = {c for cell in animal for c in moore(cell)} - animal
        for c in frontier:
            out.add(canonicalize(animal | {c}))
    return tuple(sorted(out, key=sorted))


def oracle_all_static_patterns(sets: StateSets | Iterable[int], n: int) -> list[Pattern]:
    """Every ``n``-agent pattern whose local states all lie in the static set."""
    if n > ORACLE_MAX_N:
        raise ValueError(f"oracle enumeration is limited to n <= {ORACLE_MAX_N}")
    static = sets.s_static if isinstance(sets, StateSets) else frozenset(sets)
    if n == 1:
        return []
    out = []
    for animal in lattice_animals(n):
        if all(s in static for s in pattern_states(animal).values()):
            out.append(animal)
    return out


# ---------------------------------------------------------------------------
# choosing the cross-rule exemption


def exemption_candidates(patterns: Iterable, specs: Iterable) -> list[int]:
    """Single mover states whose exemption from the cross rule makes every target unique.

    Candidates are the states of spurious patterns found without any exemption.
    Returns them best-first: more restored moves first, then by value.
    """
    from .behavior import derive, safe_actions, with_exception

    patterns = list(patterns)
    specs = [with_exception(s, None) for s in specs]
    spurious_states: set[int] = set()
    for pat in patterns:
        for spec in specs:
            db = derive(pat, spec)
            out = check_uniqueness(db.sets, pat.size, pat.cells)
            for p in out.patterns_found:
                if p != pat.cells:
                    spurious_states |= set(pattern_states(p).values())
    if not spurious_states:
        return []
    good = []
    for s in sorted(spurious_states):
        ok = True
        for pat in patterns:
            for spec in specs:
                db = derive(pat, with_exception(spec, s))
                if not check_uniqueness(db.sets, pat.size, pat.cells).unique:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            good.append(s)
    return sorted(good, key=lambda s: (-len(safe_actions(s)), s))
