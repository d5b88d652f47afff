"""Independent reference implementations used by the tests.

Nothing here imports the package; each function is written from the rules
directly so that agreement with the package means something.
"""
from __future__ import annotations

import itertools
import math

# bit k of a local state <-> cell, x East, y North
CELLS = [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)]

# fixed polyplets (king-connected, translations distinct): 1, 4, 20, 110, 638, 3832
FIXED_POLYPLETS = {1: 1, 2: 4, 3: 20, 4: 110, 5: 638, 6: 3832}


def adjacent(a, b) -> bool:
    return a != b and abs(a[0] - b[0]) <= 1 and abs(a[1] - b[1]) <= 1


def connected(cells) -> bool:
    cells = list(cells)
    if not cells:
        return True
    parent = list(range(len(cells)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in itertools.combinations(range(len(cells)), 2):
        if adjacent(cells[i], cells[j]):
            parent[find(i)] = find(j)
    return len({find(i) for i in range(len(cells))}) == 1


def local_state(cells, c) -> int:
    occ = set(cells)
    return sum(1 << k for k, (dx, dy) in enumerate(CELLS) if (c[0] + dx, c[1] + dy) in occ)


def neighbours_of(s: int) -> list:
    return [CELLS[k] for k in range(8) if s >> k & 1]


def normalise(cells) -> frozenset:
    mx = min(x for x, _ in cells)
    my = min(y for _, y in cells)
    return frozenset((x - mx, y - my) for x, y in cells)


def states_compatible(s_i: int, s_j: int, k: int) -> bool:
    """Can agent j sit in cell ``CELLS[k]`` of agent i with both views consistent?"""
    if not s_i >> k & 1:
        return False
    jx, jy = CELLS[k]
    world = {(0, 0): True}
    for b, (dx, dy) in enumerate(CELLS):
        world[(dx, dy)] = bool(s_i >> b & 1)
    for b, (dx, dy) in enumerate(CELLS):
        cell = (jx + dx, jy + dy)
        says = bool(s_j >> b & 1)
        if cell in world and world[cell] != says:
            return False
    return True


def safe_moves(s: int) -> list[int]:
    """Moves into a free sensed cell after which the old neighbours and the mover form one group."""
    nbrs = neighbours_of(s)
    out = []
    for k, target in enumerate(CELLS):
        if s >> k & 1:
            continue
        if connected(nbrs + [target]):
            out.append(k)
    return out


def animals_by_subsets(n: int) -> set[frozenset]:
    """Connected n-cell sets up to translation, by scanning every subset of an n x n box."""
    box = [(x, y) for x in range(n) for y in range(n)]
    out = set()
    for combo in itertools.combinations(box, n):
        if min(x for x, _ in combo) or min(y for _, y in combo):
            continue
        if connected(combo):
            out.add(frozenset(combo))
    return out


def all_static_patterns(static: set[int], n: int) -> set[frozenset]:
    return {a for a in animals_by_subsets(n)
            if all(local_state(a, c) in static for c in a)}


# --- controller reference ---------------------------------------------------

def radial_speed(rho, k_r, k_a, shift):
    return -k_r / rho + 1.0 / (1.0 + math.exp(-k_a * (rho - shift)))


def shift_by_bisection(rho_des, k_r, k_a, iters=200):
    """Shift with zero radial speed at ``rho_des``; radial speed falls as the shift grows."""
    lo, hi = rho_des - 50.0, rho_des + 50.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if radial_speed(rho_des, k_r, k_a, mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def pair_command(dx, dy, k_r, k_a, v_b, shift_orth, shift_diag):
    """(east, north) command towards one neighbour, picking the nearest alignment bearing."""
    rho = math.hypot(dx, dy)
    beta = math.atan2(dx, dy)  # clockwise from North
    choices = [k * math.pi / 4 for k in range(-4, 5)]
    beta_des = min(choices, key=lambda b: abs(beta - b))
    diag = round(beta_des / (math.pi / 4)) % 2 == 1
    v_r = radial_speed(rho, k_r, k_a, shift_diag if diag else shift_orth)
    north = (v_r + v_b) * math.cos(beta) - v_b * math.cos(2 * beta_des - beta)
    east = (v_r + v_b) * math.sin(beta) - v_b * math.sin(2 * beta_des - beta)
    return east, north


def _after_origin(c) -> bool:
    return c[1] > 0 or (c[1] == 0 and c[0] >= 0)


def redelmeier(n: int):
    """Stream every king-connected n-cell set once, anchored at its lowest-then-leftmost cell.

    Nothing is stored, so this reaches sizes where collecting sets would not fit.
    """
    poly: list = []
    seen = {(0, 0)}

    def grow(untried):
        while untried:
            c = untried.pop()
            poly.append(c)
            if len(poly) == n:
                yield tuple(poly)
            else:
                new = [(c[0] + dx, c[1] + dy) for dx, dy in CELLS]
                new = [p for p in new if _after_origin(p) and p not in seen]
                seen.update(new)
                yield from grow(untried + new)
                seen.difference_update(new)
            poly.pop()

    yield from grow([(0, 0)])


def streamed_static_patterns(static: set[int], n: int) -> set[frozenset]:
    """All-static n-cell patterns, found by checking every streamed lattice animal."""
    out = set()
    for cells in redelmeier(n):
        occupied = set(cells)
        if all(local_state(occupied, c) in static for c in cells):
            out.add(normalise(cells))
    return out
