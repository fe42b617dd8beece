"""First-order fast marching on a Cartesian grid, used as a baseline.

The band discipline matches the marcher: a binary heap keyed by
(time, index) with lazy deletion of stale entries.
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np

FAR, NARROW, ACCEPTED = 0, 1, 2


def cartesian_update(T_a, T_b, dx, F):
    """Upwind eikonal update from one x and one y neighbour.

    Two-sided quadratic solution when |T_a - T_b| < dx/F, otherwise the
    one-sided value min(T_a, T_b) + dx/F. Vectorized over its inputs.
    """
    T_a, T_b, dx, F = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (T_a, T_b, dx, F)))
    if np.any(F <= 0):
        raise ValueError("speed must be positive")
    s = dx / F
    diff = T_a - T_b
    two_sided = np.abs(diff) < s
    root = np.sqrt(np.where(two_sided, 2.0 * s * s - diff * diff, 0.0))
    out = np.where(two_sided, 0.5 * (T_a + T_b + root), np.minimum(T_a, T_b) + s)
    return out[()] if out.ndim == 0 else out


def _update_scalar(ta, tb, s):
    if math.isinf(ta) and math.isinf(tb):
        return math.inf
    d = ta - tb
    if abs(d) < s:
        return 0.5 * (ta + tb + math.sqrt(2.0 * s * s - d * d))
    return min(ta, tb) + s


@dataclass
class FmmResult:
    dx: float
    x: np.ndarray              # grid coordinates (1-D, shared by both axes)
    T: np.ndarray              # arrival times, inf where not computed
    state: np.ndarray
    order: np.ndarray          # flat indices in acceptance order (computed points)
    initialized: np.ndarray    # mask of exactly initialized points
    wall_time: float

    def computed_mask(self) -> np.ndarray:
        return (self.state == ACCEPTED) & ~self.initialized


def fmm_solve(speed, dx: float, exact, r_init: float | None = None, r_max: float = 0.75,
              r0: float = 0.25) -> FmmResult:
    """Arrival times of a front started from exact data near the initial circle.

    ``speed(x, y)`` must be positive; ``exact(x, y)`` gives the exact arrival
    time used for the points with |x| < r_init (default r0 + 2 dx). Only
    points with |x| < r_max + dx are computed.
    """
    if not dx > 0:
        raise ValueError("dx must be positive")
    r_init = r0 + 2.0 * dx if r_init is None else r_init
    cap = r_max + dx
    K = int(math.ceil(cap / dx)) + 1
    x = dx * np.arange(-K, K + 1)
    X, Y = np.meshgrid(x, x, indexing="ij")
    R = np.hypot(X, Y)
    n = len(x)
    F = np.asarray(speed(X, Y), dtype=float) * np.ones_like(X)
    inside = R < cap
    if np.any(F[inside] <= 0):
        raise ValueError("speed must be positive on the domain")
    T = np.full((n, n), np.inf)
    state = np.full((n, n), FAR, dtype=np.int8)
    init = R < r_init
    T[init] = exact(X[init], Y[init])
    state[init] = ACCEPTED

    start = time.perf_counter()
    Tf = T.ravel()
    st = state.ravel()
    Ff = F.ravel()
    inside_f = inside.ravel()
    heap = []

    def neighbours(k):
        i, j = divmod(k, n)
        if i > 0:
            yield k - n
        if i < n - 1:
            yield k + n
        if j > 0:
            yield k - 1
        if j < n - 1:
            yield k + 1

    def relax(k):
        i, j = divmod(k, n)
        tx = min(Tf[k - n] if i > 0 and st[k - n] == ACCEPTED else math.inf,
                 Tf[k + n] if i < n - 1 and st[k + n] == ACCEPTED else math.inf)
        ty = min(Tf[k - 1] if j > 0 and st[k - 1] == ACCEPTED else math.inf,
                 Tf[k + 1] if j < n - 1 and st[k + 1] == ACCEPTED else math.inf)
        val = _update_scalar(tx, ty, dx / Ff[k])
        if val < Tf[k]:
            Tf[k] = val
            st[k] = NARROW
            heapq.heappush(heap, (val, k))

    for k in np.flatnonzero(init.ravel()):
        for q in neighbours(int(k)):
            if st[q] != ACCEPTED and inside_f[q]:
                relax(q)
    order = []
    while heap:
        val, k = heapq.heappop(heap)
        if st[k] == ACCEPTED or val != Tf[k]:
            continue
        st[k] = ACCEPTED
        order.append(k)
        for q in neighbours(k):
            if st[q] != ACCEPTED and inside_f[q]:
                relax(q)
    wall = time.perf_counter() - start
    return FmmResult(dx, x, T, state, np.asarray(order, dtype=int), init, wall)


def fmm_error(res: FmmResult, exact) -> tuple[float, float]:
    """(L1, Linf) error over the computed points; L1 carries the dx^2 weight."""
    X, Y = np.meshgrid(res.x, res.x, indexing="ij")
    mask = res.computed_mask()
    e = np.abs(res.T[mask] - exact(X[mask], Y[mask]))
    return float(res.dx ** 2 * e.sum()), float(e.max())


def expanding_circle_fmm(dx: float) -> FmmResult:
    """The baseline on the unit-speed expanding circle of radius 0.25."""
    return fmm_solve(lambda x, y: np.ones_like(x), dx, lambda x, y: np.hypot(x, y) - 0.25)
