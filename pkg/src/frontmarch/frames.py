"""Orthonormal uvw frames attached to a plane in xyt-space.

A frame is stored as the 3x3 matrix whose rows are u, v, w. Local
coordinates are obtained by applying the matrix, global ones by applying
its transpose. The third column (alpha3, beta3, gamma3) is the only part
of the frame the front equation needs; it is exposed as ``R``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VERTICAL_TOL = 1e-14
UNIT_TOL = 1e-12


class FrameError(ValueError):
    pass


@dataclass(frozen=True)
class Frame:
    matrix: np.ndarray

    @property
    def u(self) -> np.ndarray:
        return self.matrix[0]

    @property
    def v(self) -> np.ndarray:
        return self.matrix[1]

    @property
    def w(self) -> np.ndarray:
        return self.matrix[2]

    @property
    def R(self) -> np.ndarray:
        """Time components of u, v, w: (alpha3, beta3, gamma3)."""
        return self.matrix[:, 2]

    @classmethod
    def from_rows(cls, u, v, w) -> "Frame":
        return cls(np.array([u, v, w], dtype=float))


def _check_unit(n: np.ndarray) -> None:
    if n.shape != (3,) or not np.all(np.isfinite(n)):
        raise FrameError(f"normal must be a finite 3-vector, got {n!r}")
    if abs(np.linalg.norm(n) - 1.0) > UNIT_TOL:
        raise FrameError(f"normal is not unit length: |n| = {np.linalg.norm(n)!r}")


def build_tilted_frame(n) -> Frame:
    """Frame for a plane t = a x + b y with a = -n1/n3, b = -n2/n3."""
    n = np.asarray(n, dtype=float)
    _check_unit(n)
    n1, n2, n3 = n
    if n3 == 0.0:
        raise FrameError("tilted frame needs n3 != 0")
    a = -n1 / n3
    b = -n2 / n3
    ab = np.hypot(a, b)
    if ab == 0.0:
        raise FrameError("normal is parallel to the t-axis; no tilted frame")
    mu = np.sqrt(1.0 + ab * ab)
    w = np.array([-a, -b, 1.0]) / mu
    if np.sign(w[2]) != np.sign(n3):
        w = -w
    v = np.array([a, b, ab * ab]) / (ab * mu)
    # u = v x w makes the system right-handed
    u = np.cross(v, w)
    return Frame.from_rows(u, v, w)


def build_vertical_frame(n) -> Frame:
    n = np.asarray(n, dtype=float)
    _check_unit(n)
    n1, n2, n3 = n
    if n3 != 0.0:
        raise FrameError("vertical frame needs n3 == 0")
    return Frame.from_rows([-n2, n1, 0.0], [0.0, 0.0, 1.0], [n1, n2, 0.0])


def frame_from_normal(n) -> Frame:
    """Frame with w equal to the unit normal ``n``.

    Near-vertical normals (|n3| <= 1e-14) get the vertical frame with the
    time component zeroed and the spatial part renormalized.
    """
    n = np.asarray(n, dtype=float)
    _check_unit(n)
    if abs(n[2]) >= 1.0 - 1e-15:
        raise FrameError("normal parallel to the t-axis is not supported")
    if abs(n[2]) <= VERTICAL_TOL:
        s = np.hypot(n[0], n[1])
        return build_vertical_frame(np.array([n[0] / s, n[1] / s, 0.0]))
    return build_tilted_frame(n)


def to_local(frame: Frame, p) -> np.ndarray:
    """Apply the frame matrix; works on a single point or rows of points."""
    return np.asarray(p, dtype=float) @ frame.matrix.T


def to_global(frame: Frame, q) -> np.ndarray:
    return np.asarray(q, dtype=float) @ frame.matrix


def normal_from_speed(spatial_normal, speed) -> np.ndarray:
    """Spacetime normal (n, -F)/sqrt(1+F^2) for a unit spatial normal n."""
    n1, n2 = spatial_normal
    return np.array([n1, n2, -speed]) / np.sqrt(1.0 + speed * speed)
