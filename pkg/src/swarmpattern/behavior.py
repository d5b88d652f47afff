"""Safe state-action maps and the static/active partition of local states."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Mapping

from .lattice import (
    ALL_STATES,
    FULL_STATE,
    OFFSETS,
    OMNI_ACTIONS,
    ActionSpace,
    Cell,
    LatticeError,
    NamedPattern,
    components,
    format_state,
    is_connected,
    neighbor_count,
    state_cells,
    state_from,
    state_of,
)


@dataclass(frozen=True)
class BehaviorSpec:
    """Behaviour variant.  The ALT flags are cumulative: ALT2 is ALT1 plus blocking, etc.

    ``blocked_threshold``: every non-desired state with *more than* this many
    neighbours is forced into the blocked set.  ``cross_rule``: a move is only
    kept when every agent the mover knows of ends up with at least one N/E/S/W
    neighbour; the mover state ``cross_rule_exception`` is exempt.
    """

    name: str = "Baseline"
    no_repeat: bool = False
    blocked_threshold: int | None = None
    cross_rule: bool = False
    cross_rule_exception: int | None = None

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "alt1_no_repeat": self.no_repeat,
            "blocked_neighbor_threshold": self.blocked_threshold,
            "alt3_cross_rule": self.cross_rule,
            "cross_rule_exception": self.cross_rule_exception,
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "BehaviorSpec":
        return cls(
            name=str(doc.get("name", "custom")),
            no_repeat=bool(doc.get("alt1_no_repeat", False)),
            blocked_threshold=doc.get("blocked_neighbor_threshold"),
            cross_rule=bool(doc.get("alt3_cross_rule", False)),
            cross_rule_exception=doc.get("cross_rule_exception"),
        )


# Mover state exempt from the cross rule, i.e. [1 0 1 0 0 0 1 0].  Without an
# exemption the nine-agent triangle admits a second all-static pattern (a row of
# seven with two bumps).  Exempting any of four of its states cures that; this
# one gives back the most moves.  Re-derived by uniqueness.exemption_candidates.
CROSS_RULE_EXCEPTION = state_from("N", "E", "W")

BASELINE = BehaviorSpec("Baseline")
ALT1 = BehaviorSpec("ALT1", no_repeat=True)
ALT2 = BehaviorSpec("ALT2", no_repeat=True, blocked_threshold=5)
ALT3 = BehaviorSpec("ALT3", no_repeat=True, blocked_threshold=5, cross_rule=True,
                    cross_rule_exception=CROSS_RULE_EXCEPTION)
ALT4 = BehaviorSpec("ALT4", no_repeat=True, blocked_threshold=4, cross_rule=True,
                    cross_rule_exception=CROSS_RULE_EXCEPTION)
BEHAVIORS = {b.name: b for b in (BASELINE, ALT1, ALT2, ALT3, ALT4)}


def behavior_by_name(name: str) -> BehaviorSpec:
    for key, spec in BEHAVIORS.items():
        if key.lower() == name.lower():
            return spec
    raise KeyError(f"unknown behaviour {name!r}; choose from {', '.join(BEHAVIORS)}")


# ---------------------------------------------------------------------------
# desired states and safe actions


def derive_desired_states(pattern: NamedPattern | Iterable[Cell]) -> frozenset[int]:
    cells = set(pattern.cells if isinstance(pattern, NamedPattern) else pattern)
    if len(cells) < 2:
        raise LatticeError("a pattern needs at least two agents (null states are excluded)")
    if not is_connected(cells):
        raise LatticeError("desired pattern is not connected")
    return frozenset(state_of(cells, c) for c in cells)


@lru_cache(maxsize=None)
def safe_actions(s: int, actions: ActionSpace = OMNI_ACTIONS) -> tuple[int, ...]:
    """Moves from state ``s`` that cannot collide, move blind, or split the prior neighbours.

    The vacated origin cell is not available to keep neighbours connected.
    """
    neighbours = state_cells(s)
    out = []
    for d in actions.moves:
        if s >> d & 1:
            continue
        target = OFFSETS[d]
        if not actions.layout.senses(target):
            continue
        if not is_connected(neighbours + (target,)):
            continue
        out.append(d)
    return tuple(out)


def _has_orthogonal(cell: Cell, occupied: set[Cell]) -> bool:
    x, y = cell
    return any(c in occupied for c in ((x, y + 1), (x + 1, y), (x, y - 1), (x - 1, y)))


@lru_cache(maxsize=None)
def cross_rule_allows(s: int, d: int, exception: int | None = None) -> bool:
    """Cross rule evaluated on what the mover can see.

    After moving, the mover and each of its previous neighbours must have an
    orthogonal neighbour among the agents the mover knows about (its previous
    neighbours plus itself at the new cell).
    """
    if exception is not None and s == exception:
        return True
    new = OFFSETS[d]
    known = set(state_cells(s)) | {new}
    return all(_has_orthogonal(c, known) for c in known)


def filtered_actions(s: int, spec: BehaviorSpec, actions: ActionSpace = OMNI_ACTIONS) -> tuple[int, ...]:
    acts = safe_actions(s, actions)
    if spec.cross_rule:
        acts = tuple(d for d in acts if cross_rule_allows(s, d, spec.cross_rule_exception))
    return acts


# ---------------------------------------------------------------------------
# cliques / simplicial states


def cliques(s: int) -> list[frozenset[Cell]]:
    """Connected groups of neighbours once the agent itself is removed."""
    comps = components(state_cells(s))
    return sorted((frozenset(c) for c in comps), key=lambda c: sorted(c))


def is_simplicial(s: int) -> bool:
    return s != FULL_STATE and len(cliques(s)) == 1


# ---------------------------------------------------------------------------
# partition


@dataclass(frozen=True)
class StateSets:
    s_des: frozenset[int]
    s_blocked: frozenset[int]
    s_static: frozenset[int]
    s_active: frozenset[int]
    s_simplicial: frozenset[int]

    def __post_init__(self):
        assert self.s_static == self.s_des | self.s_blocked
        assert self.s_active == frozenset(ALL_STATES) - self.s_static
        assert not (self.s_blocked & self.s_simplicial)

    def to_json(self) -> dict:
        return {k: sorted(getattr(self, k)) for k in
                ("s_des", "s_blocked", "s_static", "s_active", "s_simplicial")}


def classify(
    s_des: Iterable[int],
    actions: ActionSpace = OMNI_ACTIONS,
    extra_blocked: Iterable[int] = (),
    q: Mapping[int, tuple[int, ...]] | None = None,
) -> StateSets:
    """Split all states into desired / blocked / static / active.

    ``q`` overrides the plain safe-action lookup (used for filtered behaviours).
    Simplicial states exclude blocked ones: an agent that cannot move cannot
    leave its neighbourhood.
    """
    s_des = frozenset(s_des)
    if not s_des:
        raise ValueError("the desired state set is empty")
    extra = frozenset(extra_blocked) - s_des
    if q is None:
        no_action = {s for s in ALL_STATES if not safe_actions(s, actions)}
    else:
        no_action = {s for s in ALL_STATES if not q.get(s)}
    blocked = frozenset(no_action - s_des) | extra
    static = s_des | blocked
    simplicial = frozenset(s for s in ALL_STATES if is_simplicial(s)) - blocked
    return StateSets(s_des, blocked, static, frozenset(ALL_STATES) - static, simplicial)


@dataclass(frozen=True)
class DerivedBehavior:
    """Everything needed to run or verify one behaviour for one target pattern."""

    pattern: NamedPattern
    spec: BehaviorSpec
    sets: StateSets
    q: Mapping[int, tuple[int, ...]] = field(repr=False)

    @property
    def n(self) -> int:
        return self.pattern.size

    def actions(self, s: int) -> tuple[int, ...]:
        return self.q.get(s, ())

    def to_json(self) -> dict:
        from .lattice import dump_pattern

        return {
            "pattern": dump_pattern(self.pattern),
            "behavior": self.spec.to_json(),
            "sets": self.sets.to_json(),
            "q_safe": {str(s): list(a) for s, a in sorted(self.q.items())},
            "classes": {str(s): state_class(self.sets, s) for s in ALL_STATES},
        }


def state_class(sets: StateSets, s: int) -> str:
    if s in sets.s_des:
        return "desired"
    if s in sets.s_blocked:
        return "blocked"
    return "active"


def derive(pattern: NamedPattern, spec: BehaviorSpec = BASELINE,
           actions: ActionSpace = OMNI_ACTIONS, extra_blocked: Iterable[int] = ()) -> DerivedBehavior:
    """Desired states, safe-action map and partition for ``pattern`` under ``spec``."""
    s_des = derive_desired_states(pattern)
    extra = set(extra_blocked)
    if spec.blocked_threshold is not None:
        extra |= {s for s in ALL_STATES if neighbor_count(s) > spec.blocked_threshold}
    extra -= s_des
    q = {}
    for s in ALL_STATES:
        if s in s_des or s in extra:
            continue
        acts = filtered_actions(s, spec, actions)
        if acts:
            q[s] = acts
    sets = classify(s_des, actions, extra, q)
    return DerivedBehavior(pattern, spec, sets, q)


def derived_from_json(doc: Mapping) -> DerivedBehavior:
    from .lattice import make_pattern

    pat = make_pattern(doc["pattern"]["name"], doc["pattern"]["cells"])
    spec = BehaviorSpec.from_json(doc["behavior"])
    sets_doc = doc["sets"]
    q = {int(k): tuple(v) for k, v in doc["q_safe"].items()}
    sets = StateSets(*(frozenset(sets_doc[k]) for k in
                       ("s_des", "s_blocked", "s_static", "s_active", "s_simplicial")))
    return DerivedBehavior(pat, spec, sets, q)


def describe(db: DerivedBehavior) -> str:
    s = db.sets
    lines = [
        f"pattern {db.pattern.name} (N={db.n}), behaviour {db.spec.name}",
        f"  |S_des|={len(s.s_des)} |S_blocked|={len(s.s_blocked)} "
        f"|S_static|={len(s.s_static)} |S_active|={len(s.s_active)}",
        "  desired: " + " ".join(format_state(x) for x in sorted(s.s_des)),
    ]
    return "\n".join(lines)


def with_exception(spec: BehaviorSpec, exception: int | None) -> BehaviorSpec:
    return replace(spec, cross_rule_exception=exception)

