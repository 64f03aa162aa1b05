import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from symlab.geometry import BoundaryCurve, area_perimeter
from symlab.mesh import Mesh, MeshingError, check_mesh, refine, triangulate


@pytest.mark.parametrize("curve", [BoundaryCurve.circle(), BoundaryCurve.mode(3, 0.2),
                                   BoundaryCurve.mode(5, 0.3),
                                   BoundaryCurve(0.5, (0.0, 0.05), (0.02,), (1.0, 2.0))])
def test_triangulate_valid(curve):
    h = curve.a0 / 6
    mesh = triangulate(curve, h)
    assert check_mesh(mesh) == []
    e = mesh.vertices[mesh.boundary_edges]
    assert np.linalg.norm(e[:, 1] - e[:, 0], axis=1).max() <= h * (1 + 1e-9)
    assert np.all(np.diff(mesh.boundary_thetas) > 0)
    area, _ = area_perimeter(curve)
    assert mesh.area() == pytest.approx(area, rel=2e-2)


@settings(max_examples=8)
@given(st.integers(2, 6), st.floats(0.0, 0.25))
def test_triangulate_modes(k, eps):
    eps = min(eps, 0.8 / k**2)  # keep the curve star-shaped and mildly curved
    mesh = triangulate(BoundaryCurve.mode(k, eps), 0.1)
    assert check_mesh(mesh) == []


def test_polygon_area_converges_quadratically():
    curve = BoundaryCurve.mode(2, 0.1)
    exact = area_perimeter(curve)[0]
    errs = [exact - triangulate(curve, h).area() for h in (0.1, 0.05)]
    assert errs[0] > 0 and errs[1] > 0  # chords cut off convex caps
    assert math.log2(errs[0] / errs[1]) > 1.7


def test_refine():
    mesh = triangulate(BoundaryCurve.mode(3, 0.15), 0.1)
    fine = refine(mesh)
    assert len(fine.triangles) == 4 * len(mesh.triangles)
    assert len(fine.boundary_vertices) == 2 * len(mesh.boundary_vertices)
    assert fine.h_max == pytest.approx(0.05)
    # red refinement preserves angles except where boundary midpoints moved onto the curve
    assert check_mesh(fine, min_angle=15.0) == []
    exact = area_perimeter(mesh.curve)[0]
    assert abs(exact - fine.area()) < abs(exact - mesh.area()) / 3


def test_json_roundtrip():
    mesh = triangulate(BoundaryCurve.mode(2, 0.1, center=(0.3, -0.2)), 0.2)
    back = Mesh.from_json(mesh.to_json())
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.triangles, mesh.triangles)
    assert np.array_equal(back.boundary_vertices, mesh.boundary_vertices)
    assert np.array_equal(back.boundary_thetas, mesh.boundary_thetas)
    assert back.curve == mesh.curve and back.h_max == mesh.h_max


def test_broken_loop_rejected():
    d = triangulate(BoundaryCurve.circle(), 0.2).to_dict()
    d["boundary_edges"][0], d["boundary_edges"][1] = d["boundary_edges"][1], d["boundary_edges"][0]
    with pytest.raises(MeshingError):
        Mesh.from_dict(d)


@pytest.mark.parametrize("h", [0.0, -0.1, 0.3, float("nan")])
def test_invalid_h_max(h):
    with pytest.raises(ValueError):
        triangulate(BoundaryCurve.circle(), h)


def test_check_mesh_detects_flipped_triangle():
    mesh = triangulate(BoundaryCurve.circle(), 0.2)
    tri = mesh.triangles.copy()
    tri[0] = tri[0, [0, 2, 1]]
    bad = Mesh(mesh.vertices, tri, mesh.boundary_vertices, mesh.boundary_thetas, mesh.curve,
               mesh.h_max)
    assert any("area" in p for p in check_mesh(bad))
