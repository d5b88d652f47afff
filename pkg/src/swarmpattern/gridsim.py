"""Discrete grid world: one random active agent moves per step.

Randomness comes from a single ``numpy`` generator per run.  The initial
formation is grown with ``rng.integers``; afterwards every realised move
consumes exactly two uniforms (agent pick, action pick), drawn in blocks.
:func:`step` is the readable reference; :func:`run` uses a compiled kernel
that consumes the same stream and therefore reproduces it move for move.
"""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numba
import numpy as np

from .behavior import DerivedBehavior, derive
from .lattice import OFFSETS, Cell, NamedPattern, canonicalize, is_connected, state_of
from .uniqueness import check_uniqueness

DEFAULT_CAP = 10**6
UNIFORM_BLOCK = 1 << 16

OK, CAP, NEED_UNIFORMS, COLLISION, DISCONNECTED = 0, 1, 2, -1, -2


class SimulationError(RuntimeError):
    """A safety invariant broke, or the swarm stopped outside the target pattern."""


class NotUniqueError(ValueError):
    """The behaviour admits all-static patterns other than the target."""


# ---------------------------------------------------------------------------
# reference implementation


class UniformStream:
    """Uniforms in [0, 1) drawn from ``rng`` in fixed-size blocks."""

    def __init__(self, rng: np.random.Generator, block: int = UNIFORM_BLOCK):
        self.rng = rng
        self.block = block
        self.buf = np.empty(0)
        self.pos = 0

    def refill(self) -> None:
        self.buf = self.rng.random(self.block)
        self.pos = 0

    def next(self) -> float:
        if self.pos >= len(self.buf):
            self.refill()
        u = float(self.buf[self.pos])
        self.pos += 1
        return u


@dataclass
class GridWorld:
    occupancy: dict[Cell, int]
    positions: list[Cell]
    step_count: int = 0
    rng_seed: int | None = None
    last_mover: int | None = None

    @classmethod
    def from_cells(cls, cells: Sequence[Cell], seed: int | None = None) -> "GridWorld":
        cells = [tuple(c) for c in cells]
        if len(set(cells)) != len(cells):
            raise SimulationError("duplicate cells")
        return cls({c: i for i, c in enumerate(cells)}, list(cells), rng_seed=seed)

    @property
    def n(self) -> int:
        return len(self.positions)

    def state(self, i: int) -> int:
        return state_of(self.occupancy, self.positions[i])

    def pattern(self) -> frozenset:
        return canonicalize(self.positions)

    def active_agents(self, db: DerivedBehavior) -> list[int]:
        return [i for i in range(self.n) if db.q.get(self.state(i))]

    def check_safety(self) -> None:
        if len(self.occupancy) != self.n:
            raise SimulationError("collision: two agents share a cell")
        if not is_connected(self.positions):
            raise SimulationError(f"swarm disconnected at step {self.step_count}")


def random_formation(n: int, rng: np.random.Generator) -> list[Cell]:
    """Grow a connected set of ``n`` cells from the origin by random attachment."""
    cells = [(0, 0)]
    taken = {(0, 0)}
    while len(cells) < n:
        x, y = cells[int(rng.integers(len(cells)))]
        dx, dy = OFFSETS[int(rng.integers(8))]
        c = (x + dx, y + dy)
        if c not in taken:
            taken.add(c)
            cells.append(c)
    return cells


def step(world: GridWorld, db: DerivedBehavior, stream: UniformStream, check: bool = True) -> bool:
    """Move one agent.  Returns ``False`` (and does nothing) when nobody is active."""
    active = world.active_agents(db)
    if not active:
        return False
    if db.spec.no_repeat and len(active) > 1 and world.last_mover in active:
        active.remove(world.last_mover)
    agent = active[int(stream.next() * len(active))]
    acts = db.q[world.state(agent)]
    d = acts[int(stream.next() * len(acts))]
    x, y = world.positions[agent]
    dx, dy = OFFSETS[d]
    target = (x + dx, y + dy)
    if target in world.occupancy:
        raise SimulationError(f"collision at {target}")
    del world.occupancy[(x, y)]
    world.occupancy[target] = agent
    world.positions[agent] = target
    world.step_count += 1
    world.last_mover = agent
    if check:
        world.check_safety()
    return True


# ---------------------------------------------------------------------------
# compiled kernel


@numba.njit(cache=True)
def _agent_state(grid, mask, x, y, ox, oy):
    s = 0
    for d in range(8):
        if grid[(y + oy[d]) & mask, (x + ox[d]) & mask] >= 0:
            s |= 1 << d
    return s


@numba.njit(cache=True)
def _refresh_around(grid, mask, px, py, states, x, y, ox, oy):
    for d in range(9):
        if d < 8:
            cx, cy = x + ox[d], y + oy[d]
        else:
            cx, cy = x, y
        j = grid[cy & mask, cx & mask]
        if j >= 0:
            states[j] = _agent_state(grid, mask, px[j], py[j], ox, oy)


@numba.njit(cache=True)
def _connected(grid, mask, px, py, ox, oy, seen, queue):
    n = px.shape[0]
    for i in range(n):
        seen[i] = False
    seen[0] = True
    queue[0] = 0
    head, tail, count = 0, 1, 1
    while head < tail:
        i = queue[head]
        head += 1
        for d in range(8):
            j = grid[(py[i] + oy[d]) & mask, (px[i] + ox[d]) & mask]
            if j >= 0 and not seen[j]:
                seen[j] = True
                queue[tail] = j
                tail += 1
                count += 1
    return count == n


@numba.njit(cache=True)
def _run_kernel(grid, mask, px, py, states, is_active, n_act, acts, ox, oy,
                no_repeat, last, uniforms, u_pos, steps, cap, check,
                t_agent, t_fx, t_fy):
    n = px.shape[0]
    elig = np.empty(n, np.int64)
    seen = np.empty(n, np.bool_)
    queue = np.empty(n, np.int64)
    record = t_agent.shape[0] > 0
    while True:
        m = 0
        last_active = False
        for i in range(n):
            if is_active[states[i]]:
                elig[m] = i
                m += 1
                if i == last:
                    last_active = True
        if m == 0:
            return OK, steps, u_pos, last
        if steps >= cap:
            return CAP, steps, u_pos, last
        if u_pos + 2 > uniforms.shape[0]:
            return NEED_UNIFORMS, steps, u_pos, last
        if no_repeat and last_active and m > 1:
            k = 0
            for i in range(m):
                if elig[i] != last:
                    elig[k] = elig[i]
                    k += 1
            m = k
        a = elig[int(uniforms[u_pos] * m)]
        s = states[a]
        d = acts[s, int(uniforms[u_pos + 1] * n_act[s])]
        u_pos += 2
        x, y = px[a], py[a]
        nx, ny = x + ox[d], y + oy[d]
        if grid[ny & mask, nx & mask] >= 0:
            return COLLISION, steps, u_pos, a
        if record:
            t_agent[steps] = a
            t_fx[steps] = x
            t_fy[steps] = y
        grid[y & mask, x & mask] = -1
        grid[ny & mask, nx & mask] = a
        px[a] = nx
        py[a] = ny
        _refresh_around(grid, mask, px, py, states, x, y, ox, oy)
        _refresh_around(grid, mask, px, py, states, nx, ny, ox, oy)
        steps += 1
        last = a
        if check and not _connected(grid, mask, px, py, ox, oy, seen, queue):
            return DISCONNECTED, steps, u_pos, a


_OX = np.array([o[0] for o in OFFSETS], np.int64)
_OY = np.array([o[1] for o in OFFSETS], np.int64)


def _tables(db: DerivedBehavior):
    is_active = np.zeros(256, np.bool_)
    n_act = np.zeros(256, np.int64)
    acts = np.zeros((256, 8), np.int64)
    for s, a in db.q.items():
        is_active[s] = True
        n_act[s] = len(a)
        acts[s, : len(a)] = a
    return is_active, n_act, acts


# ---------------------------------------------------------------------------
# runs


@dataclass
class RunReport:
    converged: bool
    steps: int
    wall_time: float
    seed: int
    behavior: str
    pattern: str
    final_cells: list = field(default_factory=list, repr=False)
    moves: list = field(default_factory=list, repr=False)  # (step, agent, from, to)

    def row(self) -> list:
        return [self.pattern, self.behavior, self.seed, int(self.converged), self.steps]


@lru_cache(maxsize=None)
def _unique(pattern: NamedPattern, spec) -> bool:
    db = derive(pattern, spec)
    return check_uniqueness(db.sets, pattern.size, pattern.cells).unique


def run(db: DerivedBehavior, seed: int, cap: int = DEFAULT_CAP, *, force: bool = False,
        check: bool = True, record: bool = False, initial: Sequence[Cell] | None = None) -> RunReport:
    """One seeded run until the swarm is all-static or ``cap`` moves have been made.

    ``check`` asserts no collision and connectivity after every move.  Stopping
    with no active agent outside the target pattern raises :class:`SimulationError`.
    """
    if not force and not _unique(db.pattern, db.spec):
        raise NotUniqueError(f"{db.pattern.name} is not unique under {db.spec.name}; use force")
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    cells = list(initial) if initial is not None else random_formation(db.n, rng)
    n = len(cells)
    if n != db.n:
        raise ValueError("initial formation has the wrong number of agents")
    size = 64
    while size < 2 * n + 8:
        size *= 2
    mask = size - 1
    grid = np.full((size, size), -1, np.int64)
    px = np.array([c[0] for c in cells], np.int64)
    py = np.array([c[1] for c in cells], np.int64)
    for i in range(n):
        if grid[py[i] & mask, px[i] & mask] >= 0:
            raise SimulationError("initial formation has duplicate cells")
        grid[py[i] & mask, px[i] & mask] = i
    if not is_connected(cells):
        raise SimulationError("initial formation is disconnected")
    states = np.array([_agent_state(grid, mask, px[i], py[i], _OX, _OY) for i in range(n)], np.int64)
    is_active, n_act, acts = _tables(db)
    rec_len = cap if record else 0
    t_agent = np.empty(rec_len, np.int64)
    t_fx = np.empty(rec_len, np.int64)
    t_fy = np.empty(rec_len, np.int64)
    uniforms = np.empty(0)
    u_pos, steps, last = 0, 0, -1
    while True:
        status, steps, u_pos, last = _run_kernel(
            grid, mask, px, py, states, is_active, n_act, acts, _OX, _OY,
            db.spec.no_repeat, last, uniforms, u_pos, steps, cap, check, t_agent, t_fx, t_fy)
        if status == NEED_UNIFORMS:
            uniforms = rng.random(UNIFORM_BLOCK)
            u_pos = 0
            continue
        break
    if status == COLLISION:
        raise SimulationError(f"collision by agent {last} at step {steps}")
    if status == DISCONNECTED:
        raise SimulationError(f"swarm disconnected at step {steps}")
    final = [(int(x), int(y)) for x, y in zip(px, py)]
    converged = status == OK
    if converged and canonicalize(final) != db.pattern.cells:
        raise SimulationError(f"no active agents left but the pattern is not the target (step {steps})")
    moves = []
    if record:
        for k in range(steps):
            a = int(t_agent[k])
            moves.append((k + 1, a, (int(t_fx[k]), int(t_fy[k]))))
        # destinations follow from the next origin of the same agent or the final cell
        nxt = {a: final[a] for a in range(n)}
        out = []
        for k, a, frm in reversed(moves):
            out.append((k, a, frm, nxt[a]))
            nxt[a] = frm
        moves = list(reversed(out))
    return RunReport(converged, steps, time.perf_counter() - t0, seed, db.spec.name, db.pattern.name,
                     sorted(final), moves)


def run_reference(db: DerivedBehavior, seed: int, cap: int = DEFAULT_CAP,
                  initial: Sequence[Cell] | None = None) -> tuple[RunReport, GridWorld]:
    """Pure-Python run with :func:`step`; slow, used to cross-check :func:`run`."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    cells = list(initial) if initial is not None else random_formation(db.n, rng)
    world = GridWorld.from_cells(cells, seed)
    world.check_safety()
    stream = UniformStream(rng)
    while world.step_count < cap:
        if not step(world, db, stream):
            break
    converged = not world.active_agents(db)
    if converged and world.pattern() != db.pattern.cells:
        raise SimulationError("no active agents left but the pattern is not the target")
    rep = RunReport(converged, world.step_count, time.perf_counter() - t0, seed, db.spec.name,
                    db.pattern.name, sorted(world.positions))
    return rep, world


CSV_HEADER = ["pattern", "behavior", "seed", "converged", "steps"]


def batch(pattern: NamedPattern, specs: Iterable, n_runs: int, base_seed: int = 0,
          cap: int = DEFAULT_CAP, *, force: bool = False, check: bool = True) -> list[RunReport]:
    """``n_runs`` runs per behaviour with seeds ``base_seed + i``."""
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    reports = []
    for spec in specs:
        db = derive(pattern, spec)
        for i in range(n_runs):
            reports.append(run(db, base_seed + i, cap, force=force, check=check))
    return reports


def to_csv(reports: Iterable[RunReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()


def summarize(reports: Iterable[RunReport]) -> list[dict]:
    """Median and inter-quartile range of steps (converged runs) per pattern and behaviour."""
    groups: dict[tuple[str, str], list[RunReport]] = {}
    for r in reports:
        groups.setdefault((r.pattern, r.behavior), []).append(r)
    out = []
    for (pat, beh), rs in groups.items():
        steps = np.array([r.steps for r in rs if r.converged], float)
        q1, med, q3 = np.percentile(steps, [25, 50, 75]) if len(steps) else (np.nan,) * 3
        out.append({"pattern": pat, "behavior": beh, "runs": len(rs),
                    "converged": int(sum(r.converged for r in rs)),
                    "median_steps": float(med), "iqr_steps": float(q3 - q1)})
    return out


def summary_csv(summary: Iterable[dict]) -> str:
    buf = io.StringIO()
    cols = ["pattern", "behavior", "runs", "converged", "median_steps", "iqr_steps"]
    w = csv.DictWriter(buf, cols, lineterminator="\n")
    w.writeheader()
    for row in summary:
        w.writerow(row)
    return buf.getvalue()
