"""Local transition graphs over the 255 states and the local convergence conditions.

Three ways an agent's local state can change:

* ``T1``: the agent moves itself (cells that come into view are enumerated);
* ``T2``: one neighbour moves (``T2r``: it stays inside the agent's view);
* ``T3``: a new agent arrives in an empty cell.

The checks below never build the global graph of swarm configurations; they
only inspect these local graphs.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .behavior import DerivedBehavior, StateSets, cliques, filtered_actions
from .lattice import (
    ALL_STATES,
    DIRECTION_LEGEND,
    DIRECTIONS,
    FULL_STATE,
    OFFSETS,
    OFFSET_TO_DIRECTION,
    ORTHOGONAL_MASK,
    Cell,
    chebyshev,
    format_state,
    moore,
    neighbor_count,
    state_cells,
    state_vector,
)

T1, T2, T2R, T3 = "T1", "T2", "T2r", "T3"


@dataclass
class TransitionGraph:
    variant: str
    succ: dict[int, set[int]] = field(default_factory=dict)
    # T1 only: (source, action) -> outcomes
    labeled: dict[tuple[int, int], set[int]] = field(default_factory=dict)

    def add(self, s: int, t: int, action: int | None = None) -> None:
        self.succ.setdefault(s, set()).add(t)
        if action is not None:
            self.labeled.setdefault((s, action), set()).add(t)

    def edges(self) -> set[tuple[int, int]]:
        return {(s, t) for s, ts in self.succ.items() for t in ts}

    def out_degree(self, s: int) -> int:
        return len(self.succ.get(s, ()))

    @property
    def edge_count(self) -> int:
        return sum(len(v) for v in self.succ.values())


def _outcome_ok(s: int, cross_rule: bool) -> bool:
    # with the cross rule every agent next to a mover keeps an orthogonal neighbour
    return s != 0 and (not cross_rule or bool(s & ORTHOGONAL_MASK))


def _cell_bit(cell: Cell) -> int:
    return 1 << OFFSET_TO_DIRECTION[cell]


def build_t1(q: Mapping[int, Iterable[int]], cross_rule: bool = False) -> TransitionGraph:
    """Outcomes of the agent's own safe moves.

    In the new frame, cells that were inside the old view keep their known
    occupancy (the vacated cell is empty); every assignment of the cells that
    were out of view is a separate edge.
    """
    g = TransitionGraph(T1)
    for s, acts in q.items():
        for d in acts:
            ox, oy = OFFSETS[d]
            base = 0
            unknown = []
            for k, (cx, cy) in enumerate(OFFSETS):
                old = (cx + ox, cy + oy)
                if old == (0, 0):
                    continue
                if chebyshev(old, (0, 0)) <= 1:
                    if s & _cell_bit(old):
                        base |= 1 << k
                else:
                    unknown.append(1 << k)
            for choice in itertools.product((0, 1), repeat=len(unknown)):
                t = base | sum(b for b, c in zip(unknown, choice) if c)
                if _outcome_ok(t, cross_rule):
                    g.add(s, t, d)
    return g


def _neighbour_moves(s: int, cross_rule: bool, stay_in_view: bool) -> set[int]:
    out = set()
    for p in state_cells(s):
        for dx, dy in OFFSETS:
            dest = (p[0] + dx, p[1] + dy)
            if dest == (0, 0):
                continue
            inside = chebyshev(dest, (0, 0)) <= 1
            if inside and s & _cell_bit(dest):
                continue
            if stay_in_view and not inside:
                continue
            t = s & ~_cell_bit(p)
            if inside:
                t |= _cell_bit(dest)
            if _outcome_ok(t, cross_rule):
                out.add(t)
    return out


def build_t2(q: Mapping[int, Iterable[int]] | None = None, cross_rule: bool = False) -> TransitionGraph:
    """One neighbour steps to any Moore cell free as far as the observer can tell.

    Moves that would leave the observer without neighbours are dropped (null
    states do not exist).  ``q`` is accepted for symmetry with :func:`build_t1`;
    the observer cannot see its neighbour's full state, so legality is judged
    from the observer's view only.
    """
    del q
    g = TransitionGraph(T2)
    for s in ALL_STATES:
        for t in _neighbour_moves(s, cross_rule, stay_in_view=False):
            g.add(s, t)
    return g


def build_t2r(q: Mapping[int, Iterable[int]] | None = None, cross_rule: bool = False) -> TransitionGraph:
    """T2 restricted to neighbours that move about the agent without leaving its view."""
    del q
    g = TransitionGraph(T2R)
    for s in ALL_STATES:
        for t in _neighbour_moves(s, cross_rule, stay_in_view=True):
            g.add(s, t)
    return g


def build_t3() -> TransitionGraph:
    g = TransitionGraph(T3)
    for s in ALL_STATES:
        for d in DIRECTIONS:
            if not s >> d & 1:
                g.add(s, s | 1 << d)
    return g


# ---------------------------------------------------------------------------
# conditions


def _reverse(graphs: Iterable[TransitionGraph]) -> dict[int, set[int]]:
    rev: dict[int, set[int]] = {s: set() for s in ALL_STATES}
    for g in graphs:
        for s, ts in g.succ.items():
            for t in ts:
                rev[t].add(s)
    return rev


def reaching(target: int, graphs: Iterable[TransitionGraph]) -> set[int]:
    """States with a directed path (possibly empty) to ``target``."""
    rev = _reverse(graphs)
    seen = {target}
    queue = deque([target])
    while queue:
        t = queue.popleft()
        for s in rev[t]:
            if s not in seen:
                seen.add(s)
                queue.append(s)
    return seen


def check_achievable(t1: TransitionGraph, t2: TransitionGraph, sets: StateSets) -> tuple[bool, list[int]]:
    """Every state must reach every desired state in ``t1 ∪ t2``; returns failing states."""
    rev = _reverse((t1, t2))
    failing: set[int] = set()
    for goal in sets.s_des:
        seen = {goal}
        queue = deque([goal])
        while queue:
            t = queue.popleft()
            for s in rev[t]:
                if s not in seen:
                    seen.add(s)
                    queue.append(s)
        failing |= set(ALL_STATES) - seen
    return not failing, sorted(failing)


def clique_formable(s: int, clique: Iterable[Cell], candidates: Iterable[int]) -> dict[Cell, int] | None:
    """Assign every clique cell a candidate state consistent with ``s`` and with each other.

    Returns one assignment or ``None``.  The agent in state ``s`` sits at the origin.
    """
    cells = sorted(clique)
    candidates = sorted(candidates)
    known: dict[Cell, bool] = {(0, 0): True}
    for d, off in enumerate(OFFSETS):
        known[off] = bool(s >> d & 1)
    assignment: dict[Cell, int] = {}

    def fits(c: Cell, t: int) -> list[Cell] | None:
        added = []
        x, y = c
        for d, (dx, dy) in enumerate(OFFSETS):
            cell = (x + dx, y + dy)
            occ = bool(t >> d & 1)
            have = known.get(cell)
            if have is None:
                added.append((cell, occ))
            elif have != occ:
                return None
        return added

    def solve(i: int) -> bool:
        if i == len(cells):
            return True
        c = cells[i]
        for t in candidates:
            added = fits(c, t)
            if added is None:
                continue
            for cell, occ in added:
                known[cell] = occ
            assignment[c] = t
            if solve(i + 1):
                return True
            del assignment[c]
            for cell, _ in added:
                del known[cell]
        return False

    return dict(assignment) if solve(0) else None


def check_lemma3(sets: StateSets, t2r: TransitionGraph) -> tuple[bool, bool, list]:
    """(clique condition, loop-collapse condition, witnesses)."""
    witnesses = []
    candidates = sets.s_des & sets.s_simplicial
    clique_ok = True
    for s in sorted(sets.s_blocked - sets.s_des):
        for c in cliques(s):
            sol = clique_formable(s, c, candidates)
            if sol is not None:
                clique_ok = False
                witnesses.append({"condition": "clique", "state": s, "clique": sorted(c),
                                  "formed_by": {str(k): v for k, v in sorted(sol.items())}})
    loop_ok = True
    for s in sorted(sets.s_static):
        if neighbor_count(s) != 2:
            continue
        if not any(t in sets.s_active for t in t2r.succ.get(s, ())):
            loop_ok = False
            witnesses.append({"condition": "loop", "state": s})
    return clique_ok, loop_ok, witnesses


EXPLORE_MODES = ("strict", "motion")


def explore_closure(s: int, db: DerivedBehavior, mode: str = "strict") -> tuple[set[Cell], set[Cell]]:
    """Cells reached by an agent walking around its frozen neighbours, and the cells it should reach.

    ``strict``: the walk continues only from active states, using ``db.q``.
    ``motion``: the walk ignores whether an intermediate state is desired and
    uses the behaviour's movement rule directly; states over the blocking
    threshold still stop it.
    """
    if mode not in EXPLORE_MODES:
        raise ValueError(f"explore mode must be one of {EXPLORE_MODES}")
    neighbours = set(state_cells(s))
    targets = {c for n in neighbours for c in moore(n)} - neighbours
    start = (0, 0)
    seen = {start}
    queue = deque([start])
    limit = db.spec.blocked_threshold
    while queue:
        pos = queue.popleft()
        x, y = pos
        here = 0
        for d, (dx, dy) in enumerate(OFFSETS):
            if (x + dx, y + dy) in neighbours:
                here |= 1 << d
        if mode == "strict":
            acts = db.q.get(here, ()) if pos == start or here in db.sets.s_active else ()
        elif limit is not None and neighbor_count(here) > limit:
            acts = ()
        else:
            acts = filtered_actions(here, db.spec)
        for d in acts:
            dx, dy = OFFSETS[d]
            nxt = (x + dx, y + dy)
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen, targets


def check_theorem(db: DerivedBehavior, t3: TransitionGraph, lenient_arrival: bool = False,
                  explore_mode: str = "strict") -> tuple[bool, bool, list]:
    """(explore condition, arrival condition, witnesses)."""
    sets = db.sets
    witnesses = []
    explore_ok = True
    for s in sorted(sets.s_active & sets.s_simplicial):
        seen, targets = explore_closure(s, db, explore_mode)
        missed = targets - seen
        if missed:
            explore_ok = False
            witnesses.append({"condition": "explore", "state": s, "missed": sorted(missed)})
    arrival_ok = True
    for s in sorted(sets.s_static):
        if neighbor_count(s) > 6:
            continue
        outcomes = [t for t in t3.succ.get(s, ()) if t != FULL_STATE]
        good = [t in sets.s_active for t in outcomes]
        ok = any(good) if lenient_arrival else all(good)
        if outcomes and not ok:
            arrival_ok = False
            witnesses.append({"condition": "arrival", "state": s,
                              "static_after": sorted(t for t in outcomes if t not in sets.s_active)})
    return explore_ok, arrival_ok, witnesses


@dataclass
class ConditionReport:
    achievable: bool
    lemma3_clique_ok: bool
    lemma3_loop_ok: bool
    thm_explore_ok: bool
    thm_arrival_ok: bool
    witnesses: list = field(default_factory=list)

    @property
    def all_ok(self) -> bool:
        return (self.achievable and self.lemma3_clique_ok and self.lemma3_loop_ok
                and self.thm_explore_ok and self.thm_arrival_ok)

    def flags(self) -> dict[str, bool]:
        return {
            "achievable": self.achievable,
            "lemma3_clique_ok": self.lemma3_clique_ok,
            "lemma3_loop_ok": self.lemma3_loop_ok,
            "thm_explore_ok": self.thm_explore_ok,
            "thm_arrival_ok": self.thm_arrival_ok,
        }

    def to_json(self) -> dict:
        def fmt(w):
            w = dict(w)
            for key in ("state",):
                if key in w:
                    w[key + "_bits"] = state_vector(w[key])
                    w[key + "_dirs"] = format_state(w[key])
            return w

        return {**self.flags(), "all_ok": self.all_ok, "legend": DIRECTION_LEGEND,
                "witnesses": [fmt(w) for w in self.witnesses]}


@dataclass
class Graphs:
    t1: TransitionGraph
    t2: TransitionGraph
    t2r: TransitionGraph
    t3: TransitionGraph


def build_graphs(db: DerivedBehavior) -> Graphs:
    cr = db.spec.cross_rule
    return Graphs(build_t1(db.q, cr), build_t2(db.q, cr), build_t2r(db.q, cr), build_t3())


def check_conditions(db: DerivedBehavior, lenient_arrival: bool = False,
                     explore_mode: str = "strict", graphs: Graphs | None = None) -> ConditionReport:
    g = graphs or build_graphs(db)
    achievable, unreached = check_achievable(g.t1, g.t2, db.sets)
    witnesses: list = [{"condition": "achievable", "state": s} for s in unreached]
    clique_ok, loop_ok, w3 = check_lemma3(db.sets, g.t2r)
    explore_ok, arrival_ok, wt = check_theorem(db, g.t3, lenient_arrival, explore_mode)
    return ConditionReport(achievable, clique_ok, loop_ok, explore_ok, arrival_ok, witnesses + w3 + wt)
