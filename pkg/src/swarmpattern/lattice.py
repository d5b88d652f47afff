"""Moore-8 lattice geometry, local states and pattern helpers.

Local states are plain ``int`` bitmasks in ``1..255``: bit ``i`` is set when a
neighbour occupies ``OFFSETS[i]`` relative to the agent.  Directions are
indexed North-first and clockwise with x pointing East and y pointing North::

    7 0 1        NW N NE
    6 . 2        W  .  E
    5 4 3        SW S SE
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator

Cell = tuple[int, int]
Pattern = frozenset  # frozenset[Cell], always canonical when produced here

N, NE, E, SE, S, SW, W, NW = range(8)
DIRECTIONS = tuple(range(8))
DIRECTION_NAMES = ("N", "NE", "E", "SE", "S", "SW", "W", "NW")
OFFSETS: tuple[Cell, ...] = (
    (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1),
)
OFFSET_TO_DIRECTION = {off: d for d, off in enumerate(OFFSETS)}
ORTHOGONAL = (N, E, S, W)
ORTHOGONAL_MASK = sum(1 << d for d in ORTHOGONAL)
FULL_STATE = 0xFF
ALL_STATES = tuple(range(1, 256))
POPCOUNT = tuple(bin(i).count("1") for i in range(256))


class LatticeError(ValueError):
    """Invalid lattice input (empty pattern, cell outside pattern, ...)."""


def opposite(d: int) -> int:
    return (d + 4) % 8


def offset(d: int) -> Cell:
    return OFFSETS[d]


def direction_of(delta: Cell) -> int:
    """Direction index of a unit Moore offset."""
    try:
        return OFFSET_TO_DIRECTION[delta]
    except KeyError:
        raise LatticeError(f"{delta} is not a unit Moore offset") from None


def neighbor_count(s: int) -> int:
    return POPCOUNT[s]


def bits(s: int) -> tuple[int, ...]:
    """Directions set in state ``s``, in index order."""
    return tuple(d for d in DIRECTIONS if s >> d & 1)


def state_from(*dirs: int | str) -> int:
    """Build a state from direction indices or names: ``state_from("N", "E")``."""
    s = 0
    for d in dirs:
        if isinstance(d, str):
            d = DIRECTION_NAMES.index(d.upper())
        s |= 1 << d
    return s


def state_from_cells(cells: Iterable[Cell]) -> int:
    """State whose neighbours sit at the given relative Moore offsets."""
    return state_from(*(direction_of(c) for c in cells))


def state_cells(s: int) -> tuple[Cell, ...]:
    return tuple(OFFSETS[d] for d in bits(s))


def format_state(s: int) -> str:
    """Human readable form, e.g. ``{N,E}``."""
    return "{" + ",".join(DIRECTION_NAMES[d] for d in bits(s)) + "}"


def state_vector(s: int) -> str:
    """Bit-vector form in direction order N NE E SE S SW W NW."""
    return "[" + " ".join(str(s >> d & 1) for d in DIRECTIONS) + "]"


DIRECTION_LEGEND = "bit order: " + " ".join(DIRECTION_NAMES)


def moore(c: Cell) -> Iterator[Cell]:
    x, y = c
    for dx, dy in OFFSETS:
        yield (x + dx, y + dy)


def chebyshev(a: Cell, b: Cell) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


# ---------------------------------------------------------------------------
# layouts and action spaces


@dataclass(frozen=True)
class SensorLayout:
    offsets: tuple[Cell, ...] = OFFSETS

    def __post_init__(self):
        if len(set(self.offsets)) != len(self.offsets):
            raise LatticeError("sensor offsets must be distinct")
        if (0, 0) in self.offsets:
            raise LatticeError("sensor layout cannot contain the agent's own cell")

    @property
    def size(self) -> int:
        return len(self.offsets)

    def is_omnidirectional(self) -> bool:
        cells = set(self.offsets)
        return all((-x, -y) in cells for x, y in cells)

    def senses(self, cell: Cell) -> bool:
        return cell in self.offsets


MOORE_LAYOUT = SensorLayout()


@dataclass(frozen=True)
class ActionSpace:
    moves: tuple[int, ...] = DIRECTIONS
    layout: SensorLayout = field(default=MOORE_LAYOUT)

    def __post_init__(self):
        if not self.moves:
            raise LatticeError("action space must be non-empty")
        for d in self.moves:
            if not self.layout.senses(OFFSETS[d]):
                raise LatticeError(f"move {DIRECTION_NAMES[d]} targets an unsensed cell")


OMNI_ACTIONS = ActionSpace()


# ---------------------------------------------------------------------------
# local states of patterns


def state_of(cells: Iterable[Cell] | set[Cell], c: Cell) -> int:
    """Occupancy word sensed by the agent at ``c``."""
    if not isinstance(cells, (set, frozenset)):
        cells = set(cells)
    if c not in cells:
        raise LatticeError(f"cell {c} is not occupied")
    x, y = c
    s = 0
    for d, (dx, dy) in enumerate(OFFSETS):
        if (x + dx, y + dy) in cells:
            s |= 1 << d
    return s


def _occupied(s: int, cell: Cell) -> bool:
    """Occupancy of ``cell`` in the frame of an agent in state ``s`` (own cell occupied)."""
    if cell == (0, 0):
        return True
    return bool(s >> OFFSET_TO_DIRECTION[cell] & 1)


@lru_cache(maxsize=None)
def _overlap(delta: Cell) -> tuple[Cell, ...]:
    """Cells (in frame i) visible to agent i at origin and to agent j at ``delta``."""
    dx, dy = delta
    out = []
    for x in (-1, 0, 1):
        for y in (-1, 0, 1):
            if abs(x - dx) <= 1 and abs(y - dy) <= 1:
                out.append((x, y))
    return tuple(out)


@lru_cache(maxsize=None)
def views_agree(s_i: int, s_j: int, delta: Cell) -> bool:
    """True when states ``s_i`` (at origin) and ``s_j`` (at ``delta``) agree on every
    jointly visible cell, counting each agent's own cell as occupied."""
    if delta == (0, 0) or chebyshev(delta, (0, 0)) > 2:
        return delta != (0, 0)
    dx, dy = delta
    for x, y in _overlap(delta):
        if _occupied(s_i, (x, y)) != _occupied(s_j, (x - dx, y - dy)):
            return False
    return True


def states_match(s_i: int, s_j: int, u: int) -> bool:
    """Whether ``s_i`` and ``s_j`` can coexist with j at ``offset(u)`` from i.

    Mutual sensing follows from the shared-cell agreement because each agent's
    own cell is counted as occupied in the overlap.
    """
    return views_agree(s_i, s_j, OFFSETS[u])


# ---------------------------------------------------------------------------
# patterns


def canonicalize(cells: Iterable[Cell]) -> Pattern:
    """Translate so that min x = min y = 0."""
    cells = list(cells)
    if not cells:
        raise LatticeError("cannot canonicalize an empty cell set")
    mx = min(c[0] for c in cells)
    my = min(c[1] for c in cells)
    return frozenset((x - mx, y - my) for x, y in cells)


def is_connected(cells: Iterable[Cell]) -> bool:
    """Moore-8 connectivity by breadth-first search."""
    cells = set(cells)
    if not cells:
        return True
    start = next(iter(cells))
    seen = {start}
    queue = deque([start])
    while queue:
        c = queue.popleft()
        for nb in moore(c):
            if nb in cells and nb not in seen:
                seen.add(nb)
                queue.append(nb)
    return len(seen) == len(cells)


def components(cells: Iterable[Cell]) -> list[set[Cell]]:
    """Moore-8 connected components."""
    remaining = set(cells)
    out = []
    while remaining:
        start = remaining.pop()
        comp = {start}
        queue = deque([start])
        while queue:
            c = queue.popleft()
            for nb in moore(c):
                if nb in remaining:
                    remaining.discard(nb)
                    comp.add(nb)
                    queue.append(nb)
        out.append(comp)
    return out


def pattern_states(cells: Iterable[Cell]) -> dict[Cell, int]:
    cells = set(cells)
    return {c: state_of(cells, c) for c in cells}


def render(cells: Iterable[Cell], on: str = "#", off: str = ".") -> str:
    """ASCII drawing with North up."""
    cells = canonicalize(cells)
    w = max(x for x, _ in cells) + 1
    h = max(y for _, y in cells) + 1
    rows = []
    for y in range(h - 1, -1, -1):
        rows.append("".join(on if (x, y) in cells else off for x in range(w)))
    return "\n".join(rows)


@dataclass(frozen=True)
class NamedPattern:
    name: str
    cells: Pattern

    @property
    def size(self) -> int:
        return len(self.cells)


def make_pattern(name: str, cells: Iterable[Cell]) -> NamedPattern:
    cells = [tuple(int(v) for v in c) for c in cells]
    if len(set(cells)) != len(cells):
        raise LatticeError(f"pattern {name!r} has duplicate cells")
    canon = canonicalize(cells)
    if not is_connected(canon):
        raise LatticeError(f"pattern {name!r} is not connected")
    return NamedPattern(name, canon)


def load_pattern(path: str | Path) -> NamedPattern:
    """Read ``{"name": ..., "cells": [[x, y], ...]}``."""
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "cells" not in doc:
        raise LatticeError(f"{path}: expected an object with a 'cells' list")
    cells = doc["cells"]
    if not cells or any(not isinstance(c, list) or len(c) != 2 for c in cells):
        raise LatticeError(f"{path}: cells must be a non-empty list of [x, y] pairs")
    return make_pattern(str(doc.get("name", Path(path).stem)), cells)


def dump_pattern(p: NamedPattern) -> dict:
    return {"name": p.name, "cells": [list(c) for c in sorted(p.cells)]}


_SHIPPED = Path(__file__).with_name("patterns")


def shipped_pattern(name: str) -> NamedPattern:
    """One of the bundled patterns: ``triangle4``, ``triangle9``, ``hexagon6``, ..."""
    path = _SHIPPED / f"{name}.json"
    if not path.exists():
        raise LatticeError(f"no shipped pattern named {name!r}")
    return load_pattern(path)


def shipped_pattern_names() -> list[str]:
    return sorted(p.stem for p in _SHIPPED.glob("*.json"))
