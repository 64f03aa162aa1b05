import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from symlab.geometry import (BoundaryCurve, InvalidCurveError, StarShapednessError, area_perimeter,
                             asymmetry, distance_to_boundary, eval_boundary, geometry_summary,
                             polygon_area, polygon_disk_intersection_area, radii_at, theta_grid,
                             touching_radii)

small = st.floats(-0.08, 0.08)
curves = st.builds(lambda a0, c, s, cx, cy: BoundaryCurve(a0, tuple(c), tuple(s), (cx, cy)),
                   st.floats(0.5, 2.0), st.lists(small, max_size=4), st.lists(small, max_size=4),
                   st.floats(-3, 3), st.floats(-3, 3))


def test_circle_summary():
    g = geometry_summary(BoundaryCurve.circle(1.5, (2.0, -1.0)))
    assert g.area == pytest.approx(math.pi * 2.25, rel=1e-13)
    assert g.perimeter == pytest.approx(3 * math.pi, rel=1e-13)
    assert g.R == pytest.approx(1.5, rel=1e-13)
    assert g.diameter == pytest.approx(3.0, rel=1e-12)
    assert g.r_i == pytest.approx(1.5, rel=1e-9)
    assert math.isinf(g.r_e)
    assert g.to_dict()["r_e"] is None


@given(curves)
def test_area_matches_fourier_formula(curve):
    # |Ω| = π a0² + (π/2) Σ (a_k² + b_k²)
    exact = math.pi * curve.a0**2 + 0.5 * math.pi * sum(c * c for c in
                                                         curve.cos_coeffs + curve.sin_coeffs)
    area, _ = area_perimeter(curve)
    assert area == pytest.approx(exact, rel=1e-12)


@given(curves)
def test_turning_number(curve):
    th = theta_grid(4096)
    total = np.sum(curve.curvature(th) * curve.speed(th)) * 2 * np.pi / 4096
    assert total == pytest.approx(2 * np.pi, rel=1e-10)


def test_curvature_against_tangent_angle():
    # oracle: dφ/ds from finite differences of the tangent angle
    c = BoundaryCurve(1.0, (0.0, 0.12, 0.05), (0.03,), (0.2, 0.1))
    th = np.linspace(0.1, 6.0, 50)
    h = 1e-5
    ang = lambda t: np.unwrap(np.arctan2(*np.flip(c.derivatives(t)[1], axis=-1).T))
    dphi = (ang(th + h) - ang(th - h)) / (2 * h)
    assert np.allclose(dphi / c.speed(th), c.curvature(th), atol=1e-7)


def test_normals_outward_unit():
    c = BoundaryCurve.mode(3, 0.2)
    p, t, nu, _ = eval_boundary(c, theta_grid(64))
    assert np.allclose(np.linalg.norm(nu, axis=1), 1.0)
    assert np.allclose(np.sum(t * nu, axis=1), 0.0, atol=1e-14)
    assert c.contains(p - 1e-6 * nu).all()
    assert not c.contains(p + 1e-6 * nu).any()


def test_touching_radii_convex_is_inverse_max_curvature():
    c = BoundaryCurve.mode(2, 0.1)
    r_i, r_e = touching_radii(c)
    kmax = np.max(c.curvature(np.linspace(0, 2 * np.pi, 20001)))
    assert r_i == pytest.approx(1 / kmax, rel=1e-3)
    assert math.isinf(r_e)


def test_touching_radii_nonconvex_finite():
    c = BoundaryCurve.mode(5, 0.3)
    r_i, r_e = touching_radii(c)
    kmin = np.min(c.curvature(np.linspace(0, 2 * np.pi, 20001)))
    assert np.isfinite(r_e) and r_e <= 1 / abs(kmin) + 1e-9
    assert 0 < r_i < 1


def test_radii_at():
    r = radii_at(BoundaryCurve.circle(), (0.3, 0.0))
    assert (r.rho_i, r.rho_e) == pytest.approx((0.7, 1.3), abs=1e-10)
    r = radii_at(BoundaryCurve.mode(2, 0.05), (0.0, 0.0))
    assert r.rho_e - r.rho_i == pytest.approx(0.1, abs=1e-10)
    assert isinstance(r.rho_i, float)


def test_distance_to_boundary_disk():
    pts = np.random.default_rng(0).uniform(-0.7, 0.7, (200, 2))
    d = distance_to_boundary(BoundaryCurve.circle(), pts)
    assert np.allclose(d, 1 - np.linalg.norm(pts, axis=1), atol=1e-12)


@given(st.floats(0.2, 1.4), st.floats(0, 2 * math.pi), st.floats(-2, 2), st.floats(-2, 2))
def test_square_disk_intersection(r, rot, sx, sy):
    # exact oracle: square [-1,1]^2 ∩ concentric disk, moved rigidly
    exact = math.pi * r * r
    if r > 1:
        exact -= 4 * (r * r * math.acos(1 / r) - math.sqrt(r * r - 1))
    sq = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], float)
    R = np.array([[math.cos(rot), -math.sin(rot)], [math.sin(rot), math.cos(rot)]])
    poly = sq @ R.T + [sx, sy]
    got = polygon_disk_intersection_area(poly, (sx, sy), r)
    assert got == pytest.approx(exact, rel=1e-12, abs=1e-13)
    assert polygon_area(poly) == pytest.approx(4.0)


def test_asymmetry_values():
    assert asymmetry(BoundaryCurve.circle(), 1.0).value < 1e-6
    eps = 0.05
    c = BoundaryCurve.mode(2, eps)
    a = asymmetry(c, geometry_summary(c).R)
    assert a.value == pytest.approx(4 * eps / math.pi, rel=2e-2)  # first-order oracle
    moved = c.translated((1.0, -2.0))
    b = asymmetry(moved, geometry_summary(moved).R)
    assert b.value == pytest.approx(a.value, abs=1e-8)
    assert b.center == pytest.approx((a.center[0] + 1.0, a.center[1] - 2.0), abs=1e-6)


def test_invalid_curves():
    with pytest.raises(InvalidCurveError):
        BoundaryCurve(0.0)
    with pytest.raises(InvalidCurveError):
        BoundaryCurve(1.0, (float("nan"),))
    with pytest.raises(InvalidCurveError):
        BoundaryCurve.from_dict({"a0": 1.0, "radius": 2})
    with pytest.raises(StarShapednessError):
        BoundaryCurve.mode(2, 1.5).check_star_shaped()


def test_curve_roundtrip_and_scaling():
    c = BoundaryCurve(1.0, (0.1, 0.02), (0.05,), (0.5, 0.25))
    assert BoundaryCurve.from_dict(c.to_dict()) == c
    g, g2 = geometry_summary(c), geometry_summary(c.scaled(2.0))
    assert g2.area == pytest.approx(4 * g.area, rel=1e-12)
    assert g2.R == pytest.approx(2 * g.R, rel=1e-12)
    assert g2.r_i == pytest.approx(2 * g.r_i, rel=1e-9)
