"""Numerical studies: local solver accuracy, global convergence, timing."""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .fmm import expanding_circle_fmm, fmm_error
from .frames import frame_from_normal
from .local_solver import IterativeConfig, build_stencil, iterative_solve
from .march import march
from .metrics import error_report, fit_order
from .sampler import PlacementProblem, grid_search
from .speeds import get_field

LOCAL_HS = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7)
SWEEP_MS = (25, 50, 100, 200)


# local study -------------------------------------------------------------------

def point_on_front(field, theta: float, t: float) -> np.ndarray:
    """Spacetime point on the exact front at time t along the ray at angle theta."""
    c, s = np.cos(theta), np.sin(theta)
    rho = brentq(lambda r: field.phi(r * c, r * s, t), 1e-3, 2.0, xtol=1e-17, rtol=1e-15)
    return np.array([rho * c, rho * s, t])


def lift_to_front(field, x: float, y: float, t0: float, max_iter: int = 50) -> np.ndarray:
    """Newton iteration in t so that (x, y, t) lies on the exact front."""
    t = float(t0)
    for _ in range(max_iter):
        g = field.grad_phi(x, y, t)
        step = float(field.phi(x, y, t)) / float(g[2])
        t -= step
        if abs(step) < 1e-17:
            break
    return np.array([x, y, t])


@dataclass
class LocalRow:
    h: float
    direct_error: float
    iterative_error: float
    iterations: int


def local_case(field, h: float, theta: float = 0.3, t_a: float = 0.1) -> LocalRow:
    """One child computed from exact parents a distance O(h) apart."""
    pa = point_on_front(field, theta, t_a)
    pb = lift_to_front(field, pa[0] - 3 * h / 8, pa[1] + 4 * h / 8, t_a)
    frame = frame_from_normal(field.normal(*pa))
    la = np.zeros(3)
    lb = frame.matrix @ (pb - pa)
    G_a = float(field.speed(*pa))
    prob = PlacementProblem(la, lb, pa[2], pb[2], G_a, h, frame, pa, np.array([pa, pb]))
    res = grid_search(prob)
    if res is None:
        raise RuntimeError(f"no admissible child for h = {h}")
    p_direct = pa + np.array([res.ud[0], res.ud[1], res.w]) @ frame.matrix
    st = build_stencil(la, lb, res.ud)
    it = iterative_solve(st, field.speed, frame, res.w, IterativeConfig(h=h), origin=pa)
    p_iter = pa + np.array([res.ud[0], res.ud[1], it.w]) @ frame.matrix
    return LocalRow(h, float(abs(field.phi(*p_direct))), float(abs(field.phi(*p_iter))),
                    it.iterations)


@dataclass
class LocalReport:
    example: str
    rows: list
    direct_slope: float
    iterative_slope: float


def local_study(example: str, hs=LOCAL_HS, fit_hs=(1e-2, 1e-3, 1e-4, 1e-5)) -> LocalReport:
    """Errors and iteration counts over h; slopes fitted on ``fit_hs``."""
    field = get_field(example)
    rows = [local_case(field, h) for h in hs]
    fit = [r for r in rows if any(np.isclose(r.h, f, rtol=1e-12) for f in fit_hs)]
    hh = [r.h for r in fit]
    return LocalReport(
        field.name, rows,
        fit_order(hh, [r.direct_error for r in fit]),
        fit_order(hh, [r.iterative_error for r in fit]),
    )


# convergence sweep -------------------------------------------------------------

@dataclass
class ConvergenceRow:
    m: int
    h: float
    n_points: int
    L1: float
    L2: float
    Linf: float
    L_H: float | None
    max_band: int
    wall_time: float


@dataclass
class ConvergenceReport:
    example: str
    final_time: float
    t_H: float
    rows: list
    slopes: dict = field(default_factory=dict)

    @property
    def n_over_m2(self) -> list:
        return [r.n_points / r.m ** 2 for r in self.rows]


def _sweep_member(example: str, m: int, final_time: float, march_kwargs: dict):
    return march(get_field(example), m, final_time, **march_kwargs)


def converge_study(example: str, ms=SWEEP_MS, final_time: float | None = None,
                   t_H: float | None = None, graphs: dict | None = None,
                   workers: int = 1, **march_kwargs) -> ConvergenceReport:
    """Run the example for each m, measure the norms and fit the slopes.

    With ``workers > 1`` the runs execute in separate processes; they share
    no state, so the results are identical to a sequential sweep.
    """
    field = get_field(example)
    ft = field.final_time if final_time is None else final_time
    tH = field.t_h if t_H is None else t_H
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_sweep_member, [example] * len(ms), ms, [ft] * len(ms),
                                 [march_kwargs] * len(ms)))
    else:
        runs = [march(field, m, ft, **march_kwargs) for m in ms]
    rows = []
    for m, g in zip(ms, runs):
        if graphs is not None:
            graphs[m] = g
        rep = error_report(g, field, tH)
        rows.append(ConvergenceRow(m, g.h, len(g), rep.L1, rep.L2, rep.Linf, rep.L_H,
                                   g.max_band, g.wall_time))
    report = ConvergenceReport(field.name, ft, tH, rows)
    if len(rows) >= 3:
        hs = [r.h for r in rows]
        for name in ("L1", "L2", "Linf", "L_H"):
            report.slopes[name] = fit_order(hs, [getattr(r, name) for r in rows])
    return report


# speed test ------------------------------------------------------------------------

FMM_DXS = (1 / 50, 1 / 100, 1 / 200, 1 / 400)


@dataclass
class TimingRow:
    method: str
    example: str
    resolution: float      # h for the marcher, dx for the grid method
    wall_time: float
    L1: float


def speed_test(ms=SWEEP_MS, dxs=FMM_DXS, others=("oscillating", "rose")) -> list:
    """Wall time against L1 error for the marcher and the grid baseline."""
    rows = []
    field = get_field("expanding")
    for m in ms:
        g = march(field, m)
        rep = error_report(g, field)
        rows.append(TimingRow("marcher", field.name, g.h, g.wall_time, rep.L1))
    exact = lambda x, y: np.hypot(x, y) - 0.25  # noqa: E731
    for dx in dxs:
        res = expanding_circle_fmm(dx)
        rows.append(TimingRow("fmm", field.name, dx, res.wall_time, fmm_error(res, exact)[0]))
    for name in others:
        f = get_field(name)
        for m in ms:
            g = march(f, m)
            rows.append(TimingRow("marcher", f.name, g.h, g.wall_time, error_report(g, f).L1))
    return rows


def timing_slopes(rows) -> dict:
    """First-order check per (method, example): slope of L1 against resolution."""
    out = {}
    for key in sorted({(r.method, r.example) for r in rows}):
        sel = [r for r in rows if (r.method, r.example) == key]
        if len(sel) >= 3:
            out[key] = fit_order([r.resolution for r in sel], [r.L1 for r in sel])
    return out


def faster_at_high_accuracy(rows) -> bool | None:
    """Whether the marcher reaches the best common L1 level in less time.

    Reported, not asserted: absolute timings depend on the platform.
    """
    mr = [r for r in rows if r.method == "marcher" and r.example == "expanding"]
    fr = [r for r in rows if r.method == "fmm"]
    if not mr or not fr:
        return None
    target = max(min(r.L1 for r in mr), min(r.L1 for r in fr))
    t_m = min(r.wall_time for r in mr if r.L1 <= target)
    t_f = min(r.wall_time for r in fr if r.L1 <= target)
    return t_m < t_f


def timed(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start
