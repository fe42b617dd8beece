"""Two-parent finite-difference stencil and the child-height solvers.

Coordinates are frame coordinates (u, v, w). The stencil approximates the
directional derivatives of w = psi(u, v) along the directions from each
parent to the child, which yields an approximate normal
``nu(w) = -M w - N`` that is affine in the unknown child height ``w``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .frames import Frame, to_global

DET_TOL = 1e-10
LINEAR_TOL = 1e-14
RADICAND_CLAMP = 1e-12


class StencilError(ValueError):
    pass


class SolverError(ArithmeticError):
    pass


class NonConvergence(SolverError):
    def __init__(self, message, w, iterations):
        super().__init__(message)
        self.w = w
        self.iterations = iterations


@dataclass(frozen=True)
class LocalStencil:
    pa: np.ndarray
    pi: np.ndarray
    ud: np.ndarray
    s_a: np.ndarray
    s_i: np.ndarray
    B: np.ndarray
    M: np.ndarray
    N: np.ndarray

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.B))

    def nu(self, w: float) -> np.ndarray:
        return -self.M * w - self.N


@dataclass(frozen=True)
class QuadraticCoefficients:
    k: tuple
    rho1: float
    rho2: float
    G0: float
    discriminant: float
    leading: float
    linear: float
    constant: float


# Vectorized kernels --------------------------------------------------------

def stencil_terms(pa, pi, ud):
    """Stencil vectors for many child locations at once.

    ``ud`` has shape (K, 2). Returns (m_u, m_v, n_u, n_v, det, ok) where
    ``ok`` flags nodes with non-degenerate directions.
    """
    ud = np.atleast_2d(ud)
    sau = ud[:, 0] - pa[0]
    sav = ud[:, 1] - pa[1]
    siu = ud[:, 0] - pi[0]
    siv = ud[:, 1] - pi[1]
    la = np.hypot(sau, sav)
    li = np.hypot(siu, siv)
    ok = (la > 0.0) & (li > 0.0)
    la_s = np.where(ok, la, 1.0)
    li_s = np.where(ok, li, 1.0)
    au, av = sau / la_s, sav / la_s
    iu, iv = siu / li_s, siv / li_s
    det = au * iv - av * iu
    ok &= np.abs(det) >= DET_TOL
    det_s = np.where(ok, det, 1.0)
    ra, ri = 1.0 / la_s, 1.0 / li_s
    m_u = (iv * ra - av * ri) / det_s
    m_v = (-iu * ra + au * ri) / det_s
    qa, qi = pa[2] * ra, pi[2] * ri
    n_u = -(iv * qa - av * qi) / det_s
    n_v = -(-iu * qa + au * qi) / det_s
    return m_u, m_v, n_u, n_v, det, ok


def quadratic_terms(m_u, m_v, n_u, n_v, G0, R):
    """Coefficients of the quadratic in w obtained by squaring the relation."""
    RM = R[0] * m_u + R[1] * m_v
    RN = R[0] * n_u + R[1] * n_v - R[2]
    k1 = RM * RM
    k2 = RM * RN
    k3 = RN * RN
    k4 = m_u * m_u + m_v * m_v
    k5 = m_u * n_u + m_v * n_v
    k6 = n_u * n_u + n_v * n_v + 1.0
    G2 = G0 * G0
    lead = k1 + G2 * (k1 - k4)
    lin = k2 + G2 * (k2 - k5)
    const = k3 + G2 * (k3 - k6)
    rho1 = -2.0 * k2 * k5 + k1 * k6 + k3 * k4
    rho2 = rho1 + k5 * k5 - k4 * k6
    return (k1, k2, k3, k4, k5, k6), lead, lin, const, rho1, rho2


def direct_heights(m_u, m_v, n_u, n_v, G0, R):
    """Direct-solver heights for arrays of stencils.

    Squaring the relation admits a spurious root, so each root of the
    quadratic is kept only if nu.R has the sign opposite to G0, as the
    unsquared relation requires. When both qualify, the root whose normal
    tilts least from the frame normal wins; exact ties (the Cartesian
    case) go to the later root in time, i.e. the upwind one.

    Returns (w, feasible); infeasible entries carry NaN heights.
    """
    k, lead, lin, const, rho1, rho2 = quadratic_terms(m_u, m_v, n_u, n_v, G0, R)
    G2 = G0 * G0
    rad = rho1 + rho2 * G2
    real = G2 * rad >= -RADICAND_CLAMP
    root = abs(G0) * np.sqrt(np.maximum(rad, 0.0))
    linear_case = np.abs(lead) <= LINEAR_TOL * (1.0 + G2) * k[3]
    with np.errstate(divide="ignore", invalid="ignore"):
        lead_s = np.where(linear_case, 1.0, lead)
        w_lo = (-lin - root) / lead_s
        w_hi = (-lin + root) / lead_s
        w_lin = -const / (2.0 * lin)
    w_lo = np.where(linear_case, w_lin, w_lo)
    w_hi = np.where(linear_case, w_lin, w_hi)
    RM = R[0] * m_u + R[1] * m_v
    RN = R[0] * n_u + R[1] * n_v - R[2]
    sgn = np.sign(G0)

    def admissible(w):
        nr = -RM * w - RN
        scale = 1.0 + np.abs(RM * w) + np.abs(RN)
        return np.isfinite(w) & (sgn * nr <= 1e-10 * scale)

    ok_lo = admissible(w_lo) & real
    ok_hi = admissible(w_hi) & real

    def tilt(w):
        gu, gv = m_u * w + n_u, m_v * w + n_v
        return gu * gu + gv * gv

    # prefer the root whose normal stays closest to the frame normal; on a
    # tie (the Cartesian case) take the later root, t growing with w at R[2]
    t_lo, t_hi = tilt(w_lo), tilt(w_hi)
    tie = np.abs(t_lo - t_hi) <= 1e-9 * (1.0 + np.maximum(t_lo, t_hi))
    later_hi = R[2] * (w_hi - w_lo) >= 0.0
    pick_hi = np.where(tie, later_hi, t_hi < t_lo)
    w = np.where(ok_lo & ok_hi, np.where(pick_hi, w_hi, w_lo),
                 np.where(ok_hi, w_hi, w_lo))
    feasible = ok_lo | ok_hi
    return np.where(feasible, w, np.nan), feasible


# Scalar API ---------------------------------------------------------------

def build_stencil(pa, pi, ud) -> LocalStencil:
    pa = np.asarray(pa, dtype=float)
    pi = np.asarray(pi, dtype=float)
    ud = np.asarray(ud, dtype=float)
    s_a = ud - pa[:2]
    s_i = ud - pi[:2]
    if np.hypot(*s_a) == 0.0 or np.hypot(*s_i) == 0.0:
        raise StencilError("child location coincides with a parent")
    m_u, m_v, n_u, n_v, det, ok = stencil_terms(pa, pi, ud[None, :])
    if not ok[0]:
        raise StencilError(f"parent directions are colinear (det B = {det[0]:.3e})")
    B = np.array([s_a / np.hypot(*s_a), s_i / np.hypot(*s_i)])
    return LocalStencil(
        pa=pa, pi=pi, ud=ud, s_a=s_a, s_i=s_i, B=B,
        M=np.array([m_u[0], m_v[0], 0.0]),
        N=np.array([n_u[0], n_v[0], -1.0]),
    )


def coefficients(st: LocalStencil, G0: float, R) -> QuadraticCoefficients:
    R = np.asarray(R, dtype=float)
    k, lead, lin, const, rho1, rho2 = quadratic_terms(
        st.M[0], st.M[1], st.N[0], st.N[1], G0, R)
    return QuadraticCoefficients(
        k=tuple(float(x) for x in k), rho1=float(rho1), rho2=float(rho2),
        G0=float(G0), discriminant=float(G0 * G0 * (rho1 + rho2 * G0 * G0)),
        leading=float(lead), linear=float(lin), constant=float(const),
    )


def direct_solve(st: LocalStencil, G0: float, R):
    """Child height with the speed frozen at ``G0``.

    Returns ``(w, diagnostics)``. Raises SolverError when the discriminant
    is negative (the placement is not admissible) or the equation is
    degenerate.
    """
    R = np.asarray(R, dtype=float)
    diag = coefficients(st, G0, R)
    if diag.discriminant < -RADICAND_CLAMP:
        raise SolverError(f"negative discriminant {diag.discriminant:.3e}")
    # heights enter only through differences, so solve relative to parent a
    base = float(st.pa[2])
    pa0 = np.array([st.pa[0], st.pa[1], 0.0])
    pi0 = np.array([st.pi[0], st.pi[1], st.pi[2] - base])
    m_u, m_v, n_u, n_v, _, _ = stencil_terms(pa0, pi0, st.ud[None, :])
    w, ok = direct_heights(m_u[0], m_v[0], n_u[0], n_v[0], G0, R)
    if not ok:
        raise SolverError("no root satisfies the unsquared relation")
    return float(w) + base, diag


def child_normal(st: LocalStencil, w: float) -> np.ndarray:
    nu = st.nu(w)
    return nu / np.linalg.norm(nu)


def residual(nu: np.ndarray, R: np.ndarray, G: float) -> float:
    """nu.R + G sqrt(nu.nu - (nu.R)^2); zero on the discrete front."""
    nr = float(nu @ R)
    rad = float(nu @ nu) - nr * nr
    return nr + G * math.sqrt(max(rad, 0.0))


# Iterative solver ---------------------------------------------------------

@dataclass(frozen=True)
class IterativeConfig:
    h: float
    samples: int = 10
    tol: float = 1e-10
    max_iter: int = 100
    dtau_max: float | None = None

    def __post_init__(self):
        if not self.h > 0 or not self.tol > 0:
            raise ValueError("IterativeConfig needs h > 0 and tol > 0")

    @property
    def eps(self) -> float:
        return self.h / 10.0

    @property
    def dtau_cap(self) -> float:
        return self.h if self.dtau_max is None else self.dtau_max


class IterativeResult(NamedTuple):
    w: float
    iterations: int
    dtau: float
    clamped: int


def speed_along_child(st: LocalStencil, speed: Callable, frame: Frame, origin=None):
    """G(w): the speed at the global point with frame coordinates (u_d, w)."""
    origin = np.zeros(3) if origin is None else np.asarray(origin, dtype=float)
    base = origin + to_global(frame, [st.ud[0], st.ud[1], 0.0])
    wdir = frame.w

    def G(w):
        p = base + np.multiply.outer(w, wdir)
        return speed(p[..., 0], p[..., 1], p[..., 2])

    return G


def pseudo_time_step(st: LocalStencil, speed: Callable, frame: Frame, w0: float,
                     cfg: IterativeConfig, origin=None) -> float:
    """Pseudo-time step from a sampled Lipschitz bound of the residual."""
    G = speed_along_child(st, speed, frame, origin)
    eps = cfg.eps
    ws = np.linspace(w0 - eps, w0 + eps, cfg.samples)
    R = frame.R
    nus = -np.outer(ws, st.M) - st.N
    nr = nus @ R
    root = np.sqrt(np.maximum(np.einsum("ij,ij->i", nus, nus) - nr * nr, 0.0))
    g = np.broadcast_to(np.asarray(G(ws), dtype=float), ws.shape)
    # bound on |H(w1) - H(w2)| over ordered pairs (1 = row, 2 = column)
    q = (np.abs(nr[None, :] - nr[:, None])
         + np.abs(g)[:, None] * np.abs(root[:, None] - root[None, :])
         + np.abs(g[:, None] - g[None, :]) * root[None, :])
    Q = float(q.max())
    if Q <= 1e-14:
        return cfg.dtau_cap
    return min(0.9 * 2.0 * eps / Q, cfg.dtau_cap)


def iterative_solve(st: LocalStencil, speed: Callable, frame: Frame, w0: float,
                    cfg: IterativeConfig, origin=None) -> IterativeResult:
    """Pseudo-time iteration w <- w + dtau * residual(w) with G = F(x(w), t(w))."""
    R = frame.R
    G = speed_along_child(st, speed, frame, origin)
    dtau = pseudo_time_step(st, speed, frame, w0, cfg, origin)
    w = float(w0)
    clamped = 0
    for it in range(1, cfg.max_iter + 1):
        nu = -st.M * w - st.N
        nr = float(nu @ R)
        rad = float(nu @ nu) - nr * nr
        if rad < 0.0:
            if rad < -RADICAND_CLAMP:
                raise SolverError(f"negative radicand {rad:.3e} at iterate {it}")
            clamped += 1
            rad = 0.0
        w_new = w + dtau * (nr + float(G(w)) * math.sqrt(rad))
        if not math.isfinite(w_new):
            raise NonConvergence("iterate is not finite", w, it)
        if abs(w_new - w) < cfg.tol * dtau:
            return IterativeResult(w_new, it, dtau, clamped)
        w = w_new
    raise NonConvergence(f"no convergence in {cfg.max_iter} iterations", w, cfg.max_iter)
