"""Continuous-space, asynchronous version of the lattice behaviour.

Agents are point particles that track a commanded velocity.  While idle they
hold distance and bearing to their neighbours; at their own controller ticks
they run the finite-state machine below and, when their discretised state is
active, travel one lattice spacing along a safe direction.

    ADJUST1 --(t_adj1 elapsed, active, nobody acting)--> ACTING
    ACTING  --(done, neighbour acting, or too close)---> ADJUST2
    ADJUST2 --(t_adj2 elapsed)-------------------------> ADJUST1

Decisions happen at ticks, but sensing is continuous: an idle agent stops
adjusting as soon as a neighbour starts acting.

Positions use x = East, y = North; bearings are measured clockwise from North.
The whole run is compiled; the single-agent helpers are exposed for testing.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numba
import numpy as np
from scipy.optimize import brentq

from .behavior import ALT4, DerivedBehavior, derive
from .gridsim import random_formation
from .lattice import OFFSETS, NamedPattern

ADJUST1, ACTING, ADJUST2 = 0, 1, 2
MODE_NAMES = ("Adjusting1", "Acting", "Adjusting2")

RUNNING, SUCCESS, DISCONNECTED, TIME_CAP = 0, 1, 2, 3
STATUS_NAMES = ("running", "success", "disconnected", "time_cap")

SQRT2 = math.sqrt(2.0)

# what an idle agent does while a neighbour is acting
HOLD_FREEZE, HOLD_IGNORE_ACTING, HOLD_ALIGN_ALL = 0, 1, 2
HOLD_MODES = {"freeze": HOLD_FREEZE, "ignore-acting": HOLD_IGNORE_ACTING, "align-all": HOLD_ALIGN_ALL}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ContinuumConfig:
    rho_sensor: float = 1.6
    rho_des: float = 1.0
    rho_safe: float = 0.3
    k_r: float = 0.9
    k_a: float = 5.0
    v_action: float = 1.0
    v_b: float = 10.0
    t_adj1: float = 2.0
    t_adj2: float = 9.0
    dt: float = 0.01
    tau: float = 0.0
    controller_period: float = 0.1
    action_speed_threshold: float = 0.3  # fraction of v_action
    detect_by_speed: bool = False
    hold_mode: str = "freeze"
    geometric_margin: float = -1.0  # negative disables the metric safety check
    one_at_a_time: bool = False  # idealised global scheduler, off in faithful runs
    collision_radius: float = 0.1
    sim_time_cap: float = 20000.0
    init_jitter: float = 0.05
    record_every: float = 0.5

    def __post_init__(self):
        if not 0 < self.rho_safe < self.rho_des < self.rho_sensor:
            raise ConfigError("need 0 < rho_safe < rho_des < rho_sensor")
        if self.dt <= 0 or self.controller_period < self.dt:
            raise ConfigError("need dt > 0 and controller_period >= dt")
        if self.tau < 0:
            raise ConfigError("tau must be non-negative")
        if self.hold_mode not in HOLD_MODES:
            raise ConfigError(f"hold_mode must be one of {', '.join(HOLD_MODES)}")

    @property
    def rho_s(self) -> float:
        return solve_rho_s(self)

    def to_json(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# single-agent pieces


def _sigmoid(z: float) -> float:
    return 1.0 / (1.0 + math.exp(-z))


def attraction_repulsion(rho: float, cfg: ContinuumConfig, rho_s: float | None = None) -> float:
    """Radial speed towards a neighbour at distance ``rho`` (negative pushes away)."""
    if rho <= 0:
        raise ValueError("distance must be positive")
    if rho_s is None:
        rho_s = solve_rho_s(cfg)
    return -cfg.k_r / rho + _sigmoid(cfg.k_a * (rho - rho_s))


def solve_rho_s(cfg: ContinuumConfig, rho_des: float | None = None) -> float:
    """Sigmoid shift that puts the radial equilibrium at ``rho_des``.

    The sigmoid must equal ``k_r / rho_des``, which needs ``0 < k_r < rho_des``.
    """
    rho_des = cfg.rho_des if rho_des is None else rho_des
    if cfg.k_r <= 0 or cfg.k_a <= 0:
        raise ConfigError("k_r and k_a must be positive")
    target = cfg.k_r / rho_des
    if not 0 < target < 1:
        raise ConfigError(f"no shift gives zero radial speed at {rho_des} m with k_r={cfg.k_r}")

    def f(shift):
        return -cfg.k_r / rho_des + _sigmoid(cfg.k_a * (rho_des - shift))

    lo, hi = rho_des - 1.0, rho_des + 1.0
    while f(lo) < 0:
        lo -= 1.0
    while f(hi) > 0:
        hi += 1.0
    return brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


@numba.njit(cache=True)
def _bearing(dx, dy):
    """Clockwise from North, in (-pi, pi]."""
    return math.atan2(dx, dy)


@numba.njit(cache=True)
def _nearest_axis(beta):
    """Index k of the alignment bearing k*pi/4 closest to ``beta`` modulo pi."""
    k = int(math.floor(beta / (math.pi / 4) + 0.5)) % 4
    return k


@numba.njit(cache=True)
def _cell_of(dx, dy, rho_des):
    cx = int(math.floor(dx / rho_des + 0.5))
    cy = int(math.floor(dy / rho_des + 0.5))
    cx = min(1, max(-1, cx))
    cy = min(1, max(-1, cy))
    if cx == 0 and cy == 0:
        # too close to round: round the unit direction instead
        r = math.sqrt(dx * dx + dy * dy)
        if r == 0.0:
            return 0
        cx = int(math.floor(dx / r + 0.5))
        cy = int(math.floor(dy / r + 0.5))
    for d in range(8):
        if _OX[d] == cx and _OY[d] == cy:
            return d
    return -1


_OX = np.array([o[0] for o in OFFSETS], np.int64)
_OY = np.array([o[1] for o in OFFSETS], np.int64)


def discretize_state(neighbors, cfg: ContinuumConfig) -> int:
    """Local state from neighbour positions relative to the agent (metres)."""
    s = 0
    for dx, dy in neighbors:
        if math.hypot(dx, dy) > cfg.rho_sensor:
            continue
        s |= 1 << _cell_of(float(dx), float(dy), cfg.rho_des)
    if s == 0:
        raise ValueError("no neighbour in range: null state")
    return s


@numba.njit(cache=True)
def _pair_command(dx, dy, rho, k_r, k_a, v_b, rho_s_orth, rho_s_diag):
    beta = _bearing(dx, dy)
    k = _nearest_axis(beta)
    beta_des = k * math.pi / 4
    rho_s = rho_s_diag if k % 2 == 1 else rho_s_orth
    v_r = -k_r / rho + 1.0 / (1.0 + math.exp(-k_a * (rho - rho_s)))
    north = (v_r + v_b) * math.cos(beta) - v_b * math.cos(2 * beta_des - beta)
    east = (v_r + v_b) * math.sin(beta) - v_b * math.sin(2 * beta_des - beta)
    return east, north


@numba.njit(cache=True)
def _alignment(i, pos, rho_sensor, rho_safe, k_r, k_a, v_b, rho_s_orth, rho_s_diag, skip):
    """Summed pair commands on agent ``i``; agents flagged in ``skip`` are ignored."""
    n = pos.shape[0]
    closest = -1
    dmin = 1e300
    for j in range(n):
        if j == i or skip[j]:
            continue
        dx = pos[j, 0] - pos[i, 0]
        dy = pos[j, 1] - pos[i, 1]
        r = math.sqrt(dx * dx + dy * dy)
        if r < dmin:
            dmin = r
            closest = j
    vx = 0.0
    vy = 0.0
    if closest < 0 or dmin > rho_sensor:
        return vx, vy
    if dmin < rho_safe:
        dx = pos[closest, 0] - pos[i, 0]
        dy = pos[closest, 1] - pos[i, 1]
        return _pair_command(dx, dy, dmin, k_r, k_a, v_b, rho_s_orth, rho_s_diag)
    for j in range(n):
        if j == i or skip[j]:
            continue
        dx = pos[j, 0] - pos[i, 0]
        dy = pos[j, 1] - pos[i, 1]
        r = math.sqrt(dx * dx + dy * dy)
        if r <= rho_sensor and r > 0:
            ex, ny = _pair_command(dx, dy, r, k_r, k_a, v_b, rho_s_orth, rho_s_diag)
            vx += ex
            vy += ny
    return vx, vy


def commanded_velocity(neighbors, cfg: ContinuumConfig) -> tuple[float, float]:
    """Alignment command (east, north) for an agent at the origin."""
    nb = np.asarray(neighbors, float).reshape(-1, 2)
    pos = np.vstack([np.zeros((1, 2)), nb])
    return _alignment(0, pos, cfg.rho_sensor, cfg.rho_safe, cfg.k_r, cfg.k_a, cfg.v_b,
                      solve_rho_s(cfg), solve_rho_s(cfg, SQRT2 * cfg.rho_des),
                      np.zeros(len(pos), np.bool_))


# ---------------------------------------------------------------------------
# compiled simulation

# parameter vector layout
(P_DT, P_TAU, P_SENSOR, P_DES, P_SAFE, P_KR, P_KA, P_VB, P_VACT, P_TADJ1, P_TADJ2,
 P_PERIOD, P_THR, P_RS_ORTH, P_RS_DIAG, P_CAP, P_DETECT, P_REC, P_HOLD, P_MARGIN, P_EXCL) = range(21)


@numba.njit(cache=True)
def _state_of(i, pos, rho_sensor, rho_des):
    s = 0
    for j in range(pos.shape[0]):
        if j == i:
            continue
        dx = pos[j, 0] - pos[i, 0]
        dy = pos[j, 1] - pos[i, 1]
        if dx * dx + dy * dy <= rho_sensor * rho_sensor:
            s |= 1 << _cell_of(dx, dy, rho_des)
    return s


@numba.njit(cache=True)
def _move_keeps_links(i, pos, dir_x, dir_y, length, reach):
    """Do the agent's current neighbours and its landing point stay linked within ``reach``?"""
    n = pos.shape[0]
    idx = np.empty(n, np.int64)
    m = 0
    for j in range(n):
        if j != i:
            dx = pos[j, 0] - pos[i, 0]
            dy = pos[j, 1] - pos[i, 1]
            if dx * dx + dy * dy <= reach * reach:
                idx[m] = j
                m += 1
    # node m stands for the landing point
    px = np.empty(m + 1)
    py = np.empty(m + 1)
    for a in range(m):
        px[a] = pos[idx[a], 0]
        py[a] = pos[idx[a], 1]
    px[m] = pos[i, 0] + dir_x * length
    py[m] = pos[i, 1] + dir_y * length
    seen = np.zeros(m + 1, np.bool_)
    queue = np.empty(m + 1, np.int64)
    seen[m] = True
    queue[0] = m
    head, tail = 0, 1
    while head < tail:
        a = queue[head]
        head += 1
        for b in range(m + 1):
            if not seen[b] and (px[a] - px[b]) ** 2 + (py[a] - py[b]) ** 2 <= reach * reach:
                seen[b] = True
                queue[tail] = b
                tail += 1
    return tail == m + 1


@numba.njit(cache=True)
def _sense(i, pos, vel, mode, par):
    """Whether a neighbour of ``i`` is acting, and the nearest neighbour distance."""
    thr = par[P_THR] * par[P_VACT]
    nb_acting = False
    dmin = 1e300
    for j in range(pos.shape[0]):
        if j == i:
            continue
        dx = pos[j, 0] - pos[i, 0]
        dy = pos[j, 1] - pos[i, 1]
        r = math.sqrt(dx * dx + dy * dy)
        if r > par[P_SENSOR]:
            continue
        dmin = min(dmin, r)
        if par[P_DETECT] > 0.5:
            if math.sqrt(vel[j, 0] ** 2 + vel[j, 1] ** 2) > thr:
                nb_acting = True
        elif mode[j] == ACTING:
            nb_acting = True
    return nb_acting, dmin


@numba.njit(cache=True)
def _tick(i, t, pos, vel, mode, adj_end, act_start, act_dir, act_len, hold,
          is_active, n_act, acts, uniforms, u_pos, par):
    """Controller tick of agent ``i``; returns the new uniform position."""
    nb_acting, dmin = _sense(i, pos, vel, mode, par)
    n = pos.shape[0]
    if mode[i] == ACTING:
        if nb_acting or dmin <= par[P_SAFE]:
            mode[i] = ADJUST2
            adj_end[i] = t + par[P_TADJ2]
        hold[i] = False
        return u_pos
    hold[i] = nb_acting
    if mode[i] == ADJUST2 and t >= adj_end[i]:
        mode[i] = ADJUST1
        adj_end[i] = t + par[P_TADJ1]
    if mode[i] == ADJUST1:
        if nb_acting:
            adj_end[i] = t + par[P_TADJ1]
        elif t >= adj_end[i]:
            s = _state_of(i, pos, par[P_SENSOR], par[P_DES])
            busy = False
            if par[P_EXCL] > 0.5:
                for j in range(n):
                    if mode[j] == ACTING:
                        busy = True
            if s > 0 and is_active[s] and dmin > par[P_SAFE] and not busy and u_pos < uniforms.shape[0]:
                d = acts[s, int(uniforms[u_pos] * n_act[s])]
                u_pos += 1
                norm = math.sqrt(_OX[d] ** 2 + _OY[d] ** 2)
                ux = _OX[d] / norm
                uy = _OY[d] / norm
                length = par[P_DES] * norm
                if par[P_MARGIN] < 0 or _move_keeps_links(i, pos, ux, uy, length,
                                                       par[P_SENSOR] - par[P_MARGIN]):
                    act_dir[i, 0] = ux
                    act_dir[i, 1] = uy
                    act_len[i] = length
                    act_start[i, 0] = pos[i, 0]
                    act_start[i, 1] = pos[i, 1]
                    mode[i] = ACTING
                else:
                    adj_end[i] = t + par[P_TADJ1]
            else:
                adj_end[i] = t + par[P_TADJ1]
    return u_pos


@numba.njit(cache=True)
def _connected(pos, rho_sensor, seen, queue):
    n = pos.shape[0]
    for i in range(n):
        seen[i] = False
    seen[0] = True
    queue[0] = 0
    head, tail = 0, 1
    r2 = rho_sensor * rho_sensor
    while head < tail:
        i = queue[head]
        head += 1
        for j in range(n):
            if not seen[j]:
                dx = pos[j, 0] - pos[i, 0]
                dy = pos[j, 1] - pos[i, 1]
                if dx * dx + dy * dy <= r2:
                    seen[j] = True
                    queue[tail] = j
                    tail += 1
    return tail == n


@numba.njit(cache=True)
def _formed(pos, rho_sensor, rho_des, is_des, target_keys):
    """All discretised states desired and the rounded lattice pattern equals the target."""
    n = pos.shape[0]
    for i in range(n):
        s = _state_of(i, pos, rho_sensor, rho_des)
        if s == 0 or not is_des[s]:
            return False
    cx = np.empty(n, np.int64)
    cy = np.empty(n, np.int64)
    for i in range(n):
        cx[i] = int(math.floor((pos[i, 0] - pos[0, 0]) / rho_des + 0.5))
        cy[i] = int(math.floor((pos[i, 1] - pos[0, 1]) / rho_des + 0.5))
    mx = cx.min()
    my = cy.min()
    keys = np.empty(n, np.int64)
    for i in range(n):
        keys[i] = (cx[i] - mx) * 4096 + (cy[i] - my)
    keys.sort()
    for i in range(n):
        if keys[i] != target_keys[i]:
            return False
    return True


@numba.njit(cache=True)
def _simulate(pos, vel, mode, adj_end, next_tick, is_active, n_act, acts, is_des,
              target_keys, uniforms, par, rec_t, rec_pos, rec_vel, rec_mode):
    n = pos.shape[0]
    dt = par[P_DT]
    tau = par[P_TAU]
    period = par[P_PERIOD]
    cap_steps = int(par[P_CAP] / dt + 0.5)
    rec_every = max(1, int(par[P_REC] / dt + 0.5))
    max_rec = rec_t.shape[0]
    act_start = np.zeros((n, 2))
    act_dir = np.zeros((n, 2))
    act_len = np.zeros(n)
    hold = np.zeros(n, np.bool_)
    seen = np.empty(n, np.bool_)
    queue = np.empty(n, np.int64)
    cmd = np.zeros((n, 2))
    no_skip = np.zeros(n, np.bool_)
    acting_now = np.zeros(n, np.bool_)
    u_pos = 0
    n_rec = 0
    actions = 0
    interrupts = 0
    min_dist = 1e300
    check_every = max(1, int(period / dt + 0.5))
    status = TIME_CAP
    k_end = cap_steps
    for k in range(cap_steps + 1):
        t = k * dt
        # pairwise distance monitor
        for i in range(n):
            for j in range(i + 1, n):
                dx = pos[j, 0] - pos[i, 0]
                dy = pos[j, 1] - pos[i, 1]
                r = math.sqrt(dx * dx + dy * dy)
                if r < min_dist:
                    min_dist = r
        if not _connected(pos, par[P_SENSOR], seen, queue):
            status = DISCONNECTED
            k_end = k
            break
        if k % rec_every == 0 and n_rec < max_rec:
            rec_t[n_rec] = t
            for i in range(n):
                rec_pos[n_rec, i, 0] = pos[i, 0]
                rec_pos[n_rec, i, 1] = pos[i, 1]
                rec_vel[n_rec, i, 0] = vel[i, 0]
                rec_vel[n_rec, i, 1] = vel[i, 1]
                rec_mode[n_rec, i] = mode[i]
            n_rec += 1
        if k % check_every == 0 and _formed(pos, par[P_SENSOR], par[P_DES], is_des, target_keys):
            status = SUCCESS
            k_end = k
            break
        if k == cap_steps:
            break
        # controller ticks, in agent order
        for i in range(n):
            if t + 1e-9 >= next_tick[i]:
                was_acting = mode[i] == ACTING
                u_pos = _tick(i, t, pos, vel, mode, adj_end, act_start, act_dir, act_len, hold,
                              is_active, n_act, acts, uniforms, u_pos, par)
                if mode[i] == ACTING and not was_acting:
                    actions += 1
                elif was_acting and mode[i] != ACTING:
                    interrupts += 1
                next_tick[i] += period
        # sensing is continuous: idle agents notice an acting neighbour between ticks
        for i in range(n):
            acting_now[i] = mode[i] == ACTING
            if not acting_now[i]:
                hold[i] = _sense(i, pos, vel, mode, par)[0]
        for i in range(n):
            if mode[i] == ACTING:
                cmd[i, 0] = par[P_VACT] * act_dir[i, 0]
                cmd[i, 1] = par[P_VACT] * act_dir[i, 1]
            elif hold[i] and par[P_HOLD] == HOLD_FREEZE:
                cmd[i, 0] = 0.0
                cmd[i, 1] = 0.0
            else:
                skip = acting_now if hold[i] and par[P_HOLD] == HOLD_IGNORE_ACTING else no_skip
                cx, cy = _alignment(i, pos, par[P_SENSOR], par[P_SAFE], par[P_KR], par[P_KA],
                                    par[P_VB], par[P_RS_ORTH], par[P_RS_DIAG], skip)
                cmd[i, 0] = cx
                cmd[i, 1] = cy
        # first-order velocity tracking, explicit Euler
        a = 1.0 if tau <= 0 else min(1.0, dt / tau)
        for i in range(n):
            vel[i, 0] += a * (cmd[i, 0] - vel[i, 0])
            vel[i, 1] += a * (cmd[i, 1] - vel[i, 1])
            pos[i, 0] += vel[i, 0] * dt
            pos[i, 1] += vel[i, 1] * dt
            if mode[i] == ACTING:
                done = ((pos[i, 0] - act_start[i, 0]) * act_dir[i, 0]
                        + (pos[i, 1] - act_start[i, 1]) * act_dir[i, 1])
                if done >= act_len[i]:
                    mode[i] = ADJUST2
                    adj_end[i] = t + dt + par[P_TADJ2]
    return status, k_end * dt, min_dist, n_rec, actions, interrupts, u_pos


# ---------------------------------------------------------------------------
# driver


@dataclass
class ContinuumReport:
    success: bool
    status: str
    t_complete: float | None
    t_end: float
    min_distance: float
    disconnect_time: float | None
    actions: int
    interrupted: int
    seed: int
    pattern: str
    wall_time: float = 0.0
    trajectory: dict | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("trajectory")
        d.pop("wall_time")
        return d


def _param_vector(cfg: ContinuumConfig) -> np.ndarray:
    par = np.zeros(P_EXCL + 1)
    par[P_DT] = cfg.dt
    par[P_TAU] = cfg.tau
    par[P_SENSOR] = cfg.rho_sensor
    par[P_DES] = cfg.rho_des
    par[P_SAFE] = cfg.rho_safe
    par[P_KR] = cfg.k_r
    par[P_KA] = cfg.k_a
    par[P_VB] = cfg.v_b
    par[P_VACT] = cfg.v_action
    par[P_TADJ1] = cfg.t_adj1
    par[P_TADJ2] = cfg.t_adj2
    par[P_PERIOD] = cfg.controller_period
    par[P_THR] = cfg.action_speed_threshold
    par[P_RS_ORTH] = solve_rho_s(cfg)
    par[P_RS_DIAG] = solve_rho_s(cfg, SQRT2 * cfg.rho_des)
    par[P_CAP] = cfg.sim_time_cap
    par[P_DETECT] = 1.0 if cfg.detect_by_speed else 0.0
    par[P_HOLD] = HOLD_MODES[cfg.hold_mode]
    par[P_MARGIN] = cfg.geometric_margin
    par[P_EXCL] = 1.0 if cfg.one_at_a_time else 0.0
    par[P_REC] = cfg.record_every
    return par


def _tables(db: DerivedBehavior):
    is_active = np.zeros(256, np.bool_)
    n_act = np.zeros(256, np.int64)
    acts = np.zeros((256, 8), np.int64)
    for s, a in db.q.items():
        is_active[s] = True
        n_act[s] = len(a)
        acts[s, : len(a)] = a
    is_des = np.zeros(256, np.bool_)
    for s in db.sets.s_des:
        is_des[s] = True
    return is_active, n_act, acts, is_des


def initial_positions(db: DerivedBehavior, cfg: ContinuumConfig, rng: np.random.Generator) -> np.ndarray:
    cells = random_formation(db.n, rng)
    pos = np.array(cells, float) * cfg.rho_des
    return pos + rng.uniform(-cfg.init_jitter, cfg.init_jitter, pos.shape)


def simulate(pattern: NamedPattern | DerivedBehavior, cfg: ContinuumConfig = ContinuumConfig(),
             seed: int = 0, *, record: bool = False, initial: np.ndarray | None = None) -> ContinuumReport:
    """One seeded run.  ``pattern`` may be a derived behaviour; plain patterns use ALT4."""
    db = pattern if isinstance(pattern, DerivedBehavior) else derive(pattern, ALT4)
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    pos = initial_positions(db, cfg, rng) if initial is None else np.array(initial, float)
    n = pos.shape[0]
    if n != db.n:
        raise ValueError("initial positions have the wrong number of agents")
    phases = rng.uniform(0.0, cfg.controller_period, n)
    n_u = int(n * cfg.sim_time_cap / max(cfg.t_adj1, cfg.controller_period)) + 16
    uniforms = rng.random(n_u)
    vel = np.zeros((n, 2))
    mode = np.full(n, ADJUST1, np.int64)
    adj_end = phases + cfg.t_adj1
    next_tick = phases.copy()
    is_active, n_act, acts, is_des = _tables(db)
    target = sorted(db.pattern.cells)
    target_keys = np.array(sorted(x * 4096 + y for x, y in target), np.int64)
    par = _param_vector(cfg)
    n_rec = int(cfg.sim_time_cap / cfg.record_every) + 2 if record else 0
    rec_t = np.zeros(n_rec)
    rec_pos = np.zeros((n_rec, n, 2))
    rec_vel = np.zeros((n_rec, n, 2))
    rec_mode = np.zeros((n_rec, n), np.int64)
    status, t_end, min_dist, used, actions, interrupts, _ = _simulate(
        pos, vel, mode, adj_end, next_tick, is_active, n_act, acts, is_des, target_keys,
        uniforms, par, rec_t, rec_pos, rec_vel, rec_mode)
    traj = None
    if record:
        traj = {"t": rec_t[:used], "pos": rec_pos[:used], "vel": rec_vel[:used],
                "mode": rec_mode[:used], "final": pos.copy()}
    success = status == SUCCESS
    return ContinuumReport(
        success=success, status=STATUS_NAMES[status],
        t_complete=float(t_end) if success else None, t_end=float(t_end),
        min_distance=float(min_dist),
        disconnect_time=float(t_end) if status == DISCONNECTED else None,
        actions=int(actions), interrupted=int(interrupts), seed=seed, pattern=db.pattern.name,
        wall_time=time.perf_counter() - t0, trajectory=traj)


@dataclass(frozen=True)
class TickResult:
    mode: int
    adj_end: float
    action: int | None  # direction index when an action starts or continues
    hold: bool


def controller_tick(i: int, t: float, positions, modes, db: DerivedBehavior,
                    cfg: ContinuumConfig = ContinuumConfig(), *, adj_end=None, velocities=None,
                    action: int | None = None, u: float = 0.0) -> TickResult:
    """One controller tick of agent ``i`` outside the compiled loop.

    ``u`` in [0, 1) picks among the safe actions; ``action`` is the direction of
    an action already in progress.
    """
    pos = np.array(positions, float).reshape(-1, 2)
    n = pos.shape[0]
    mode = np.array(modes, np.int64)
    vel = np.zeros((n, 2)) if velocities is None else np.array(velocities, float).reshape(n, 2)
    ends = np.full(n, t) if adj_end is None else np.array(adj_end, float)
    act_dir = np.zeros((n, 2))
    if action is not None:
        norm = math.hypot(*OFFSETS[action])
        act_dir[i] = (OFFSETS[action][0] / norm, OFFSETS[action][1] / norm)
    hold = np.zeros(n, np.bool_)
    is_active, n_act, acts, _ = _tables(db)
    _tick(i, t, pos, vel, mode, ends, np.zeros((n, 2)), act_dir, np.zeros(n), hold,
          is_active, n_act, acts, np.array([u]), 0, _param_vector(cfg))
    chosen = None
    if mode[i] == ACTING:
        ox, oy = act_dir[i]
        for d, (dx, dy) in enumerate(OFFSETS):
            norm = math.hypot(dx, dy)
            if abs(dx / norm - ox) < 1e-12 and abs(dy / norm - oy) < 1e-12:
                chosen = d
    return TickResult(int(mode[i]), float(ends[i]), chosen, bool(hold[i]))


def trajectory_csv(rep: ContinuumReport) -> str:
    if rep.trajectory is None:
        raise ValueError("run was not recorded")
    tr = rep.trajectory
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "agent", "x", "y", "vx", "vy", "mode"])
    for k, t in enumerate(tr["t"]):
        for i in range(tr["pos"].shape[1]):
            x, y = tr["pos"][k, i]
            vx, vy = tr["vel"][k, i]
            w.writerow([f"{t:.3f}", i, f"{x:.6f}", f"{y:.6f}", f"{vx:.6f}", f"{vy:.6f}",
                        MODE_NAMES[tr["mode"][k, i]]])
    return buf.getvalue()


def with_overrides(cfg: ContinuumConfig, **kw) -> ContinuumConfig:
    return replace(cfg, **kw)



RUN_CSV_HEADER = ["pattern", "seed", "status", "success", "t_complete", "t_end", "min_distance",
                  "actions", "interrupted"]


def batch(pattern: NamedPattern | DerivedBehavior, cfg: ContinuumConfig = ContinuumConfig(),
          n_runs: int = 50, base_seed: int = 0) -> list[ContinuumReport]:
    """``n_runs`` runs with seeds ``base_seed + i``."""
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    db = pattern if isinstance(pattern, DerivedBehavior) else derive(pattern, ALT4)
    return [simulate(db, cfg, base_seed + i) for i in range(n_runs)]


def runs_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUN_CSV_HEADER)
    for r in reports:
        tc = "" if r.t_complete is None else f"{r.t_complete:.2f}"
        w.writerow([r.pattern, r.seed, r.status, int(r.success), tc, f"{r.t_end:.2f}",
                    f"{r.min_distance:.6f}", r.actions, r.interrupted])
    return buf.getvalue()


def summarize(reports) -> dict:
    """Success count, median completion time and worst spacing over successful runs."""
    reports = list(reports)
    ok = [r for r in reports if r.success]
    by_status = {name: sum(r.status == name for r in reports) for name in STATUS_NAMES[1:]}
    return {
        "runs": len(reports),
        "successes": len(ok),
        "median_t_complete": float(np.median([r.t_complete for r in ok])) if ok else None,
        "max_t_complete": max((r.t_complete for r in ok), default=None),
        "min_distance_successful": min((r.min_distance for r in ok), default=None),
        "min_distance_all": min((r.min_distance for r in reports), default=None),
        **by_status,
    }
