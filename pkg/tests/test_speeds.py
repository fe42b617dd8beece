import math

import numpy as np
import pytest

from frontmarch.speeds import REGISTRY, OutOfValidity, get_field, sample_initial_front

NAMES = sorted(REGISTRY)
SIGNED = [n for n in NAMES if get_field(n).signed_distance]


def test_speed_values():
    assert get_field("a").speed(0.3, -0.7, 0.2) == 1.0
    assert get_field("b").speed(0.1, 0.2, 0.1) == pytest.approx(0.0, abs=1e-15)
    assert get_field("d").speed(0.3, 0.0, 0.0) == pytest.approx(0.7 * math.sin(3.0))
    # the rose reduces to cos(3 theta) at t = 0
    assert get_field("f").speed(0.25, 0.0, 0.0) == pytest.approx(1.0)


def test_exact_solutions():
    assert get_field("a").phi(0.5, 0.0, 0.25) == 0.0
    assert get_field("f").phi(0.25, 0.0, 0.0) == 0.0
    assert get_field("a").phi(0.5 + 0.01, 0.0, 0.25) == pytest.approx(0.01)


def test_two_circles_touch_at_the_merge_time():
    t_merge = (1 - math.sqrt(0.4)) / 2
    assert t_merge == pytest.approx(0.18377, abs=1e-5)
    f = get_field("two-circles")
    assert f.radius(t_merge) == pytest.approx(0.5, abs=1e-14)
    assert f.phi(0.0, 0.0, t_merge) == pytest.approx(0.0, abs=1e-14)


def test_validity_window_is_enforced():
    with pytest.raises(OutOfValidity):
        get_field("c").phi(0.9, 0.0, 0.51)
    with pytest.raises(ValueError):
        get_field("f").speed(0.0, 0.0, 0.1)


def test_unknown_example():
    with pytest.raises(KeyError):
        get_field("nope")
    assert get_field("e").name == "escaping"


def test_initial_front_for_the_expanding_circle():
    pts, nrm, cycles = sample_initial_front(get_field("a"), 4)
    k = np.arange(4)
    assert np.allclose(pts[:, :2], 0.25 * np.column_stack([np.cos(k * np.pi / 2), np.sin(k * np.pi / 2)]))
    assert np.all(pts[:, 2] == 0.0)
    expected = np.column_stack([np.cos(k * np.pi / 2), np.sin(k * np.pi / 2), -np.ones(4)]) / np.sqrt(2)
    assert np.allclose(nrm, expected)
    assert cycles == [[0, 1, 2, 3]]


def test_initial_normal_time_part_follows_the_speed():
    f = get_field("d")
    _, nrm, _ = sample_initial_front(f, 8)
    F0 = 0.7 * math.sin(3.0)
    assert np.allclose(nrm[:, 2], -F0 / math.sqrt(1 + F0 * F0))
    assert np.allclose(np.linalg.norm(nrm, axis=1), 1.0)


def test_two_circles_seed_two_cycles():
    pts, _, cycles = sample_initial_front(get_field("c"), 80)
    assert len(pts) == 160 and [len(c) for c in cycles] == [80, 80]


def test_too_few_points():
    with pytest.raises(ValueError):
        sample_initial_front(get_field("a"), 2)


@pytest.mark.parametrize("name", NAMES)
def test_samples_lie_on_the_initial_front(name):
    f = get_field(name)
    pts, _, _ = sample_initial_front(f, 37)
    assert np.max(np.abs(f.phi(*pts.T))) <= 1e-12


def random_points(f, rng, n=100):
    t_hi = min(f.final_time, f.t_valid)
    out = []
    while len(out) < n:
        t = rng.uniform(0.0, t_hi)
        x, y = rng.uniform(-0.9, 0.9, size=2)
        r = math.hypot(x, y)
        if r < 0.05 or abs(x) < 0.02:
            continue
        out.append((x, y, t))
    return np.array(out)


@pytest.mark.parametrize("name", SIGNED)
def test_signed_distance_has_unit_gradient(name, rng):
    f = get_field(name)
    d = 1e-6
    for x, y, t in random_points(f, rng, 50):
        gx = (f.phi(x + d, y, t) - f.phi(x - d, y, t)) / (2 * d)
        gy = (f.phi(x, y + d, t) - f.phi(x, y - d, t)) / (2 * d)
        assert math.hypot(gx, gy) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("name", NAMES)
def test_level_set_equation_residual(name, rng):
    f = get_field(name)
    d = 1e-6
    for x, y, t in random_points(f, rng):
        t = min(max(t, d), f.t_valid - d)
        gx = (f.phi(x + d, y, t) - f.phi(x - d, y, t)) / (2 * d)
        gy = (f.phi(x, y + d, t) - f.phi(x, y - d, t)) / (2 * d)
        gt = (f.phi(x, y, t + d) - f.phi(x, y, t - d)) / (2 * d)
        res = gt + f.speed(x, y, t) * math.hypot(gx, gy)
        assert abs(res) <= 1e-6 * (1 + math.hypot(gx, gy))


@pytest.mark.parametrize("name", NAMES)
def test_analytic_gradient_matches_differences(name, rng):
    f = get_field(name)
    d = 1e-6
    for x, y, t in random_points(f, rng, 20):
        t = min(max(t, d), f.t_valid - d)
        g = f.grad_phi(x, y, t)
        fd = [(f.phi(x + d, y, t) - f.phi(x - d, y, t)) / (2 * d),
              (f.phi(x, y + d, t) - f.phi(x, y - d, t)) / (2 * d),
              (f.phi(x, y, t + d) - f.phi(x, y, t - d)) / (2 * d)]
        assert np.allclose(g, fd, atol=1e-5 * (1 + np.abs(fd).max()))


@pytest.mark.parametrize("name", NAMES)
def test_contour_lies_on_the_exact_front(name):
    f = get_field(name)
    t = min(f.t_h, f.t_valid)
    xy = f.contour(t, 500)
    assert len(xy) > 100
    assert np.max(np.abs(f.phi(xy[:, 0], xy[:, 1], t))) <= 1e-12
