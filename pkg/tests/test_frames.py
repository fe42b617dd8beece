import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from frontmarch.frames import (
    FrameError,
    build_tilted_frame,
    build_vertical_frame,
    frame_from_normal,
    normal_from_speed,
    to_global,
    to_local,
)

unit = st.tuples(*[st.floats(-1, 1)] * 3).map(np.array)


def normalized(v):
    return v / np.linalg.norm(v)


@given(unit)
def test_frame_is_orthonormal_and_right_handed(v):
    assume(np.linalg.norm(v) > 1e-3)
    n = normalized(v)
    assume(1e-6 < abs(n[2]) < 1 - 1e-6)
    fr = frame_from_normal(n)
    M = fr.matrix
    assert np.allclose(M @ M.T, np.eye(3), atol=1e-12)
    assert np.allclose(fr.w, n, atol=1e-12)
    assert np.allclose(np.cross(fr.v, fr.w), fr.u, atol=1e-12)
    assert np.allclose(fr.R, M[:, 2])


@given(unit, st.tuples(*[st.floats(-10, 10)] * 3))
def test_local_global_round_trip(v, p):
    assume(np.linalg.norm(v) > 1e-3)
    n = normalized(v)
    assume(1e-6 < abs(n[2]) < 1 - 1e-6)
    fr = frame_from_normal(n)
    p = np.array(p)
    assert np.allclose(to_global(fr, to_local(fr, p)), p, atol=1e-12)


def test_tilted_frame_matches_closed_form():
    # plane t = a x + b y with a = 0.5, b = -0.25
    a, b = 0.5, -0.25
    mu = np.sqrt(1 + a * a + b * b)
    n = np.array([-a, -b, 1.0]) / mu
    fr = build_tilted_frame(n)
    ab = np.hypot(a, b)
    assert np.allclose(fr.v, np.array([a, b, ab * ab]) / (ab * mu))
    assert np.allclose(fr.u, np.cross(fr.v, fr.w))
    # u lies in the plane t = 0 direction-wise: no time component
    assert abs(fr.u[2]) < 1e-15


def test_vertical_frame_rows():
    n = np.array([0.6, 0.8, 0.0])
    fr = build_vertical_frame(n)
    assert np.allclose(fr.u, [-0.8, 0.6, 0.0])
    assert np.allclose(fr.v, [0.0, 0.0, 1.0])
    assert np.allclose(fr.w, n)
    assert frame_from_normal(n).matrix.tolist() == fr.matrix.tolist()


def test_nearly_vertical_normal_uses_vertical_frame():
    n = normalized(np.array([0.6, 0.8, 1e-16]))
    assert np.allclose(frame_from_normal(n).v, [0, 0, 1])


@pytest.mark.parametrize("bad", [[0, 0, 1.0], [1.0, 1.0, 0.0], [np.nan, 0, 1]])
def test_bad_normals_are_rejected(bad):
    with pytest.raises(FrameError):
        frame_from_normal(np.array(bad, dtype=float))


def test_normal_from_speed():
    assert np.allclose(normal_from_speed([1.0, 0.0], 1.0), np.array([1, 0, -1]) / np.sqrt(2))
    # zero speed: the normal is horizontal
    assert np.allclose(normal_from_speed([0.0, 1.0], 0.0), [0, 1, 0])
