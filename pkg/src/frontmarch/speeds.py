"""Speed fields with known level-set solutions.

Every field evaluates vectorized over numpy arrays. ``phi`` is a solution
of phi_t + F |grad phi| = 0 whose zero set is the front; it is a signed
distance for all fields except the rose.
"""
from __future__ import annotations

import math

import numpy as np


class OutOfValidity(ValueError):
    pass


class SpeedField:
    name = ""
    r0 = 0.25
    final_time = 0.5
    t_h = 0.35
    t_valid = math.inf
    signed_distance = True
    default_m = 50

    def speed(self, x, y, t):
        raise NotImplementedError

    def __call__(self, x, y, t):
        return self.speed(x, y, t)

    def _phi(self, x, y, t):
        raise NotImplementedError

    def _grad_phi(self, x, y, t):
        raise NotImplementedError

    def check_valid(self, t) -> None:
        if np.any(np.asarray(t) > self.t_valid + 1e-12):
            raise OutOfValidity(
                f"{self.name}: exact solution only holds up to t = {self.t_valid}")

    def phi(self, x, y, t):
        self.check_valid(t)
        return self._phi(x, y, t)

    def grad_phi(self, x, y, t):
        """(phi_x, phi_y, phi_t) stacked on the last axis."""
        self.check_valid(t)
        return np.stack(np.broadcast_arrays(*self._grad_phi(x, y, t)), axis=-1)

    def normal(self, x, y, t):
        g = self.grad_phi(x, y, t)
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def circles(self):
        """Initial front as a list of (center_x, center_y, radius)."""
        return [(0.0, 0.0, self.r0)]

    def contour(self, t, n):
        """Dense sampling of the exact front at time t, shape (K, 2)."""
        raise NotImplementedError

    def sample_initial_front(self, m):
        return sample_initial_front(self, m)


def _circle(cx, cy, r, n):
    th = 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([cx + r * np.cos(th), cy + r * np.sin(th)])


class RadialField(SpeedField):
    """Circle centered at the origin with radius R(t) and speed R'(t)."""

    def radius(self, t):
        raise NotImplementedError

    def _phi(self, x, y, t):
        return np.hypot(x, y) - self.radius(t)

    def _grad_phi(self, x, y, t):
        r = np.hypot(x, y)
        return x / r, y / r, -self.speed(x, y, t)

    def contour(self, t, n):
        r = float(self.radius(t))
        if r <= 0.0:
            return np.empty((0, 2))
        return _circle(0.0, 0.0, r, n)


class Expanding(RadialField):
    name = "expanding"
    final_time = 0.5
    t_h = 0.35
    default_m = 25

    def speed(self, x, y, t):
        return 1.0 + 0.0 * (np.asarray(x) + np.asarray(t))

    def radius(self, t):
        return self.r0 + t


class Football(RadialField):
    name = "football"
    c = 10.0
    final_time = 0.4
    t_h = 0.1
    default_m = 60

    def speed(self, x, y, t):
        return 1.0 - np.exp(self.c * np.asarray(t) - 1.0) + 0.0 * np.asarray(x)

    def radius(self, t):
        c = self.c
        return self.r0 - (np.exp(c * np.asarray(t)) - 1.0) / (c * math.e) + t


class Oscillating(RadialField):
    name = "oscillating"
    a, b, c = 0.7, 10.0, 0.3
    final_time = 1.5 * 2.0 * math.pi / 10.0
    t_h = 0.7
    default_m = 50

    def speed(self, x, y, t):
        return self.a * np.sin(self.b * (np.asarray(t) + self.c)) + 0.0 * np.asarray(x)

    def radius(self, t):
        a, b, c = self.a, self.b, self.c
        return self.r0 + (a / b) * (math.cos(b * c) - np.cos(b * (np.asarray(t) + c)))


class TwoCircles(SpeedField):
    name = "two-circles"
    r0 = 0.35
    final_time = 0.5
    t_h = 0.45
    t_valid = 0.5
    default_m = 80
    offset = 0.5

    def speed(self, x, y, t):
        return 1.0 - 2.0 * np.asarray(t) + 0.0 * np.asarray(x)

    def radius(self, t):
        return self.r0 + t - t * t

    def _center(self, x):
        return np.where(np.asarray(x) >= 0.0, self.offset, -self.offset)

    def _phi(self, x, y, t):
        return np.hypot(x - self._center(x), y) - self.radius(t)

    def _grad_phi(self, x, y, t):
        dx = x - self._center(x)
        d = np.hypot(dx, y)
        return dx / d, y / d, -self.speed(x, y, t)

    def circles(self):
        return [(-self.offset, 0.0, self.r0), (self.offset, 0.0, self.r0)]

    def contour(self, t, n):
        r = float(self.radius(t))
        out = []
        for sgn in (-1.0, 1.0):
            pts = _circle(sgn * self.offset, 0.0, r, n)
            other = np.hypot(pts[:, 0] + sgn * self.offset, pts[:, 1])
            out.append(pts[other >= r])
        return np.vstack(out)


class Escaping(SpeedField):
    name = "escaping"
    b, c = 10.0, 0.5
    final_time = 0.4
    t_h = 0.35
    default_m = 50

    def g(self, t):
        return np.arctan(self.b * (np.asarray(t) - 0.5)) + math.pi / 2.0

    def dg(self, t):
        s = self.b * (np.asarray(t) - 0.5)
        return self.b / (1.0 + s * s)

    def center_velocity(self, t):
        return self.dg(t) * t + self.g(t)

    def speed(self, x, y, t):
        dx = x - self.g(t) * t
        return dx * self.center_velocity(t) / np.hypot(dx, y) + self.c

    def _phi(self, x, y, t):
        return np.hypot(x - self.g(t) * t, y) - (self.r0 + self.c * t)

    def _grad_phi(self, x, y, t):
        dx = x - self.g(t) * t
        d = np.hypot(dx, y)
        return dx / d, y / d, -dx * self.center_velocity(t) / d - self.c

    def contour(self, t, n):
        return _circle(float(self.g(t) * t), 0.0, self.r0 + self.c * t, n)


class Rose(SpeedField):
    name = "rose"
    petals = 3
    final_time = 0.19
    t_h = 0.15
    t_valid = 0.25
    signed_distance = False
    default_m = 50

    def speed(self, x, y, t):
        r = np.hypot(x, y)
        if np.any(r == 0.0):
            raise ValueError("rose speed is undefined at the origin")
        th = np.arctan2(y, x)
        lt = self.petals * np.asarray(t) / r
        s = np.sin(self.petals * th)
        return np.cos(self.petals * th) / np.sqrt(1.0 + (lt * s) ** 2)

    def _phi(self, x, y, t):
        th = np.arctan2(y, x)
        return np.hypot(x, y) - (t * np.cos(self.petals * th) + self.r0)

    def _grad_phi(self, x, y, t):
        r = np.hypot(x, y)
        th = np.arctan2(y, x)
        l = self.petals
        tang = t * l * np.sin(l * th) / r
        c, s = np.cos(th), np.sin(th)
        return c - tang * s, s + tang * c, -np.cos(l * th) + 0.0 * r

    def contour(self, t, n):
        th = 2.0 * np.pi * np.arange(n) / n
        r = self.r0 + t * np.cos(self.petals * th)
        return np.column_stack([r * np.cos(th), r * np.sin(th)])


REGISTRY = {
    "expanding": Expanding,
    "football": Football,
    "two-circles": TwoCircles,
    "oscillating": Oscillating,
    "escaping": Escaping,
    "rose": Rose,
}
ALIASES = dict(zip("abcdef", REGISTRY))


def get_field(name: str) -> SpeedField:
    key = ALIASES.get(name, name)
    try:
        return REGISTRY[key]()
    except KeyError:
        raise KeyError(f"unknown example {name!r}; choose from {sorted(REGISTRY)}") from None


def sample_initial_front(field: SpeedField, m: int):
    """m equally spaced points per initial circle, counter-clockwise.

    Returns (points, normals, cycles): points (K, 3) at t = 0, unit
    spacetime normals (K, 3), and a list of index lists, one closed cycle
    per circle.
    """
    if m < 3:
        raise ValueError("need at least 3 points per circle")
    pts, cycles = [], []
    for cx, cy, r in field.circles():
        start = sum(len(c) for c in cycles)
        pts.append(_circle(cx, cy, r, m))
        cycles.append(list(range(start, start + m)))
    xy = np.vstack(pts)
    points = np.column_stack([xy, np.zeros(len(xy))])
    normals = field.normal(xy[:, 0], xy[:, 1], 0.0)
    return points, normals, cycles
