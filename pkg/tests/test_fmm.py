import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from frontmarch.fmm import (
    ACCEPTED, cartesian_update, expanding_circle_fmm, fmm_error, fmm_solve,
)
from frontmarch.local_solver import build_stencil, direct_solve
from frontmarch.metrics import fit_order

DOWN = np.array([0.0, 0.0, -1.0])


def test_symmetric_update():
    assert cartesian_update(0.0, 0.0, 1.0, 1.0) == pytest.approx(1 / math.sqrt(2), abs=1e-15)


def test_one_sided_update():
    assert cartesian_update(0.0, 2.0, 1.0, 1.0) == 1.0
    assert cartesian_update(3.0, 0.5, 0.1, 0.5) == pytest.approx(0.7)


def test_update_rejects_bad_speed():
    with pytest.raises(ValueError):
        cartesian_update(0.0, 0.0, 1.0, 0.0)


def test_update_is_vectorized():
    out = cartesian_update(np.zeros(3), np.array([0.0, 2.0, 0.0]), 1.0, 1.0)
    assert out.shape == (3,)


@given(st.floats(0.0, 1.0), st.floats(-0.999, 0.999), st.floats(-4, 0), st.floats(-1, 1))
def test_update_satisfies_the_discrete_eikonal_equation(Ta, frac, ldx, lF):
    dx, F = 10.0 ** ldx, 10.0 ** lF
    Tb = Ta + frac * dx / F
    T = cartesian_update(Ta, Tb, dx, F)
    assert T >= max(Ta, Tb)
    lhs = ((T - Ta) / dx) ** 2 + ((T - Tb) / dx) ** 2
    assert lhs * F * F == pytest.approx(1.0, rel=1e-9)


def test_agrees_with_direct_solver_under_vertical_frame():
    rng = np.random.default_rng(4)
    worst = 0.0
    n = 0
    while n < 1000:
        dx = 10 ** rng.uniform(-4, 0)
        F = 10 ** rng.uniform(-1, 1)
        Ta = rng.uniform(0, 1)
        Tb = Ta + rng.uniform(-1, 1) * dx / F
        if abs(Ta - Tb) >= dx / F:
            continue
        stencil = build_stencil([-dx, 0.0, -Ta], [0.0, -dx, -Tb], [0.0, 0.0])
        w, _ = direct_solve(stencil, F, DOWN)
        T = cartesian_update(Ta, Tb, dx, F)
        worst = max(worst, abs(-w - T) / max(1.0, abs(T)))
        n += 1
    assert worst <= 1e-12


def exact_circle(x, y):
    return np.hypot(x, y) - 0.25


def test_expanding_circle_is_first_order():
    dxs = [1 / 25, 1 / 50, 1 / 100]
    l1, linf = zip(*(fmm_error(expanding_circle_fmm(dx), exact_circle) for dx in dxs))
    assert fit_order(dxs, l1) == pytest.approx(1.0, abs=0.3)
    for dx, e in zip(dxs, linf):
        assert e <= 2 * dx


def test_solver_state_and_order():
    res = expanding_circle_fmm(1 / 40)
    X, Y = np.meshgrid(res.x, res.x, indexing="ij")
    R = np.hypot(X, Y)
    assert np.all(res.initialized == (R < 0.25 + 2 / 40))
    assert np.all(res.state[R < 0.75] == ACCEPTED)
    assert not np.any(np.isfinite(res.T[R >= 0.75 + 2 / 40]))
    T = res.T.ravel()[res.order]
    assert np.all(np.diff(T) >= 0)
    assert np.all(T >= 0)


def test_rejects_non_positive_speed():
    with pytest.raises(ValueError):
        fmm_solve(lambda x, y: x, 0.05, exact_circle)
    with pytest.raises(ValueError):
        fmm_solve(lambda x, y: np.ones_like(x), 0.0, exact_circle)
