"""Where to put the child: a refined grid search over the uv-plane.

The objective pulls the child toward its parents; admissibility requires a
real height, causality (t_d at least dt past both parents) and a minimum
spacetime distance h to the nearby accepted points.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frames import Frame
from .local_solver import RADICAND_CLAMP, direct_heights, stencil_terms

CONSTRAINT_TOL = 1e-14


@dataclass
class PlacementProblem:
    pa: np.ndarray            # parent a in frame coordinates
    pi: np.ndarray            # parent i in frame coordinates
    t_a: float
    t_i: float
    G_a: float
    h: float
    frame: Frame
    origin: np.ndarray        # global point whose frame coordinates are zero
    neighbors: np.ndarray     # (L, 3) global points for the spacing check
    s: int = 10
    refinements: int = 5

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be positive")

    @property
    def dt(self) -> float:
        return self.h / np.sqrt(self.G_a * self.G_a + 1.0)

    @property
    def u_min(self) -> np.ndarray:
        return 0.5 * (self.pa[:2] + self.pi[:2])


@dataclass
class GridResult:
    ud: np.ndarray
    w: float
    f: float
    history: list = field(default_factory=list)


def objective(ud, ua, ui):
    ud = np.asarray(ud, dtype=float)
    da = ud - np.asarray(ua, dtype=float)
    di = ud - np.asarray(ui, dtype=float)
    return np.sum(da * da, axis=-1) + np.sum(di * di, axis=-1)


def check_v1(discriminant) -> bool:
    return bool(discriminant >= -RADICAND_CLAMP)


def check_v2(t_d, t_a, t_i, dt):
    return np.asarray(t_d) - max(t_a, t_i) >= dt - CONSTRAINT_TOL


def check_e(p_d, neighbors, h):
    """Minimum spacetime distance from each row of ``p_d`` to ``neighbors`` >= h."""
    p_d = np.atleast_2d(p_d)
    nb = np.atleast_2d(neighbors)
    d2 = np.sum((p_d[:, None, :] - nb[None, :, :]) ** 2, axis=-1)
    return np.sqrt(d2.min(axis=1)) >= h - CONSTRAINT_TOL


def evaluate_nodes(prob: PlacementProblem, nodes: np.ndarray):
    """Heights, global points and constraint mask for candidate child locations."""
    m_u, m_v, n_u, n_v, _, ok = stencil_terms(prob.pa, prob.pi, nodes)
    w, real = direct_heights(m_u, m_v, n_u, n_v, prob.G_a, prob.frame.R)
    ok &= real
    local = np.column_stack([nodes, np.where(ok, w, 0.0)])
    glob = prob.origin + local @ prob.frame.matrix
    ok &= check_v2(glob[:, 2], prob.t_a, prob.t_i, prob.dt)
    ok &= check_e(glob, prob.neighbors, prob.h)
    return w, glob, ok


def grid_search(prob: PlacementProblem, tol: float = 1e-15) -> GridResult | None:
    """Refined s x s grid search; None when no admissible node is found.

    The first grid is centered at (u_min, v_a + h) with spacing h/2; each
    refinement recenters at the best node so far and halves the spacing.
    """
    offsets = np.arange(prob.s) - 0.5 * (prob.s - 1)
    center = np.array([prob.u_min[0], prob.pa[1] + prob.h])
    hbar = 0.5 * prob.h
    best = None
    f_prev = 1e6
    history = []
    for _ in range(prob.refinements):
        uu = center[0] + offsets * hbar
        vv = center[1] + offsets * hbar
        V, U = np.meshgrid(vv, uu, indexing="ij")
        nodes = np.column_stack([U.ravel(), V.ravel()])
        w, _, ok = evaluate_nodes(prob, nodes)
        f = np.where(ok, objective(nodes, prob.pa[:2], prob.pi[:2]), np.inf)
        k = int(np.argmin(f))
        if np.isfinite(f[k]) and (best is None or f[k] < best.f):
            best = GridResult(nodes[k].copy(), float(w[k]), float(f[k]))
        if best is None:
            return None
        history.append(best.f)
        if not np.isfinite(f[k]) or abs(best.f - f_prev) <= tol:
            break
        f_prev = best.f
        center = best.ud
        hbar *= 0.5
    best.history = history
    return best
