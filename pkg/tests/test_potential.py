import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import bundled_systems, sample_points
from nbilliard.dynamics import DEFAULT_OPTIONS, PhaseState, integrate_to_wall
from nbilliard.errors import CollisionPoint, DegenerateFoot, ValidationError
from nbilliard.potential import (CentreSystem, EnergyLevel, Wall, convexity_radius,
                                 escape_cone, eval_gradient, eval_hessian, eval_laplacian,
                                 eval_potential, jm_curvature, jm_factor, lagrange_jacobi,
                                 wall_curvature)

single = CentreSystem([[0.0, 0.0]], [1.0], [1.0])
boltzmann = CentreSystem([[0.0, 0.0], [0.0, 0.0]], [1.0, 0.1], [1.0, 2.0])


def test_potential_values(pair):
    assert eval_potential(pair, (0.0, 0.0)) == 2.0
    assert eval_potential(boltzmann, (0.6, 0.8)) == pytest.approx(1.1, abs=1e-15)
    ref = 1.0 / math.hypot(1.0, 10.0) + 1.0 / math.hypot(-1.0, 10.0)
    assert abs(eval_potential(pair, (0.0, 10.0)) - ref) <= 1e-15


def test_collision_point_rejected(pair):
    with pytest.raises(CollisionPoint):
        eval_potential(pair, (1.0, 0.0))
    with pytest.raises(CollisionPoint):
        eval_gradient(pair, (-1.0, 1e-13))


def test_system_validation():
    with pytest.raises(ValidationError):
        CentreSystem([[0, 0]], [0.0], [1.0])
    with pytest.raises(ValidationError):
        CentreSystem([[0, 0]], [1.0], [0.5])
    with pytest.raises(ValidationError):
        CentreSystem([[0, 0], [1, 0]], [1.0], [1.0])
    with pytest.raises(ValidationError):
        EnergyLevel(0.0)
    # duplicate centres are fine
    assert boltzmann.n == 2


def test_wall_frame_and_halfplane(pair):
    w = Wall.from_angle(0.7, 2.0)
    v, n = np.array(w.v), np.array(w.w)
    assert abs(v @ n) < 1e-14 and abs(np.linalg.norm(v) - 1) < 1e-14
    assert v[0] * n[1] - v[1] * n[0] > 0
    assert w.height(w.point(3.3)) == pytest.approx(0.0, abs=1e-14)
    w.validate(pair)
    with pytest.raises(ValidationError):
        Wall((0.0, 1.0), 0.5).validate(pair)


def test_gradient_examples(pair):
    assert np.array_equal(eval_gradient(pair, (0.0, 0.0)), [0.0, 0.0])
    assert np.allclose(eval_gradient(single, (2.0, 0.0)), [-0.25, 0.0], atol=1e-16)


@pytest.mark.parametrize("name,sys,wall", bundled_systems())
def test_gradient_and_laplacian_finite_differences(name, sys, wall, rng):
    step = 1e-6
    for x in sample_points(rng, sys, 200, lo=0.3):
        g = eval_gradient(sys, x)
        fd = np.array([(eval_potential(sys, x + step * e) - eval_potential(sys, x - step * e))
                       / (2 * step) for e in np.eye(2)])
        assert np.all(np.abs(g - fd) <= 1e-8 * max(1.0, np.abs(g).max()))
        H = eval_hessian(sys, x)
        assert np.trace(H) == pytest.approx(eval_laplacian(sys, x), rel=1e-12)
        hs = 1e-4
        lap = sum(eval_potential(sys, x + hs * e) + eval_potential(sys, x - hs * e)
                  for e in np.eye(2)) - 4 * eval_potential(sys, x)
        assert abs(lap / hs**2 - eval_laplacian(sys, x)) <= 1e-5 * max(1.0, abs(lap / hs**2))


def test_laplacian_examples():
    assert eval_laplacian(single, (1.0, 0.0)) == pytest.approx(1.0, rel=1e-15)
    sq = CentreSystem([[0.0, 0.0]], [1.0], [2.0])
    assert eval_laplacian(sq, (0.0, 2.0)) == pytest.approx(0.25, rel=1e-15)


def test_jm_factor(pair):
    assert jm_factor(pair, 1.0, (0.0, 0.0)) == 6.0
    x = (0.3, -2.2)
    assert jm_factor(pair, 0.7, x) == 2 * 0.7 + 2 * eval_potential(pair, x)
    assert jm_factor(pair, 0.7, (1e9, 0.0)) == pytest.approx(1.4, rel=1e-8)


def test_jm_curvature_single_centre():
    assert jm_curvature(single, 1.0, (1.0, 0.0)) == pytest.approx(-1 / 32, rel=1e-14)
    assert abs(jm_curvature(single, 1.0, (1e4, 0.0))) < 1e-10


def test_jm_curvature_matches_conformal_finite_difference(pair):
    # K = -lap(log g / 2) / g, with the Laplacian taken by finite differences
    h, x, hs = 0.8, np.array([0.4, 1.3]), 1e-3
    phi = lambda p: 0.5 * math.log(jm_factor(pair, h, p))  # noqa: E731
    lap = sum(phi(x + hs * e) + phi(x - hs * e) for e in np.eye(2)) - 4 * phi(x)
    ref = -lap / hs**2 / jm_factor(pair, h, x)
    assert jm_curvature(pair, h, x) == pytest.approx(ref, rel=1e-5)


@pytest.mark.parametrize("h", [0.1, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("name,sys,wall", bundled_systems())
def test_curvature_signs(name, sys, wall, h, rng):
    for x in sample_points(rng, sys, 300, lo=1e-3, hi=20.0):
        assert jm_curvature(sys, h, x) < 0
    for t in np.linspace(-10, 10, 101):
        assert wall_curvature(sys, h, wall, t) < 0


def test_wall_curvature_formula(pair):
    wall, h = Wall((1.0, 0.0), 3.0), 1.0
    x = wall.point(0.0)
    g = 2 * (h + eval_potential(pair, x))
    ref = -float(eval_gradient(pair, x) @ np.array(wall.w)) / g**1.5
    assert wall_curvature(pair, h, wall, 0.0) == pytest.approx(ref, rel=1e-14)
    assert ref < 0
    assert abs(wall_curvature(pair, h, wall, 1e6)) < 1e-12


def test_lagrange_jacobi_examples(pair):
    assert lagrange_jacobi(pair, 1.0, (0.0, 0.0)) == 3.0
    for r in (0.1, 1.0, 7.0):
        assert lagrange_jacobi(single, 0.4, (0.0, r)) == pytest.approx(0.4 + 0.5 / r, rel=1e-14)
    assert lagrange_jacobi(pair, 0.4, (0.0, 1e8)) == pytest.approx(0.4, rel=1e-7)


def test_convexity_radius_closed_form(pair):
    assert convexity_radius(pair, 1.0) == 2.0
    assert convexity_radius(single, 1.0) == 0.0
    sys = CentreSystem([[1.0, 0.0], [-1.0, 0.0]], [1.0, 1.0], [1.5, 1.5])
    assert convexity_radius(sys, 0.3) == convexity_radius(sys, 3.0) == pytest.approx(4.0)


def test_convexity_radius_search(rng):
    # an alpha = 2 term needs the sampling search; check positivity outside
    sys = CentreSystem([[0.5, 0.0], [-0.5, 0.0]], [1.0, 0.5], [2.0, 1.0])
    for h in (0.5, 2.0):
        R = convexity_radius(sys, h)
        assert R > 0
        ang = rng.uniform(0, 2 * np.pi, 2000)
        rad = R * (1 + rng.exponential(0.5, 2000)) + 1e-9
        pts = sys.barycentre + np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
        assert all(lagrange_jacobi(sys, h, p) > 0 for p in pts)


def test_escape_cone_examples():
    wall = Wall((1.0, 0.0), 1.0)
    # |x0|/|x| = 1/2 on both sides of the foot point
    lo, hi = escape_cone(wall, wall.point(-math.sqrt(3)))
    assert (lo, hi) == (0.0, pytest.approx(2 * math.pi / 3, abs=1e-15))
    lo, hi = escape_cone(wall, wall.point(math.sqrt(3)))
    assert lo == pytest.approx(math.pi / 3, abs=1e-15) and hi == math.pi
    lo, hi = escape_cone(wall, wall.point(-1e9))
    assert hi == pytest.approx(math.pi / 2, abs=1e-8)
    with pytest.raises(DegenerateFoot):
        escape_cone(wall, wall.foot)


@pytest.mark.parametrize("s", [-6.0, 4.5])
def test_escape_cone_complement_escapes(pair, s):
    # wall beyond the convexity radius: directions outside the cone never return
    wall = Wall((1.0, 0.0), 3.0)
    x = wall.point(s)
    lo, hi = escape_cone(wall, x)
    h = 1.0
    speed = math.sqrt(2 * (h + eval_potential(pair, x)))
    outside = [t for t in np.linspace(0.05, math.pi - 0.05, 25) if not lo < t < hi]
    assert outside
    for t in outside:
        seg = integrate_to_wall(pair, wall, PhaseState(x, wall.velocity(t, speed)),
                                DEFAULT_OPTIONS)
        assert seg.terminal == "escaped"
        r = np.hypot(*seg.positions.T)
        assert np.all(np.diff(r) > 0)


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.05, 5.0))
def test_potential_symmetry_and_positivity(x, y, h):
    pair = CentreSystem.symmetric_pair()
    if min(math.hypot(x - 1, y), math.hypot(x + 1, y)) < 1e-3:
        return
    v = eval_potential(pair, (x, y))
    assert v > 0
    assert eval_potential(pair, (-x, y)) == pytest.approx(v, rel=1e-14)
    assert eval_potential(pair, (x, -y)) == pytest.approx(v, rel=1e-14)
    assert jm_curvature(pair, h, (x, y)) < 0
