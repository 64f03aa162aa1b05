import functools
import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, strategies as st

from symlab.fem import (TRI7_POINTS, TRI7_WEIGHTS, AssemblyError, BoundaryQuadrature, FESpace,
                        PatchRecovery, SolverError, boundary_mass, consistent_flux, duffy_rule,
                        pcg, reference_basis, solve_poisson)
from symlab.geometry import BoundaryCurve, area_perimeter
from symlab.mesh import Mesh, refine, triangulate


def _monomial_integral(i, j):
    # ∫ xi^i eta^j over the reference triangle = i! j! / (i + j + 2)!
    return math.factorial(i) * math.factorial(j) / math.factorial(i + j + 2)


@pytest.mark.parametrize("rule", ["tri7", "duffy"])
def test_quadrature_exactness(rule):
    pts, w = (TRI7_POINTS, TRI7_WEIGHTS) if rule == "tri7" else duffy_rule(4)
    deg = 5 if rule == "tri7" else 6
    for i in range(deg + 1):
        for j in range(deg + 1 - i):
            got = np.sum(w * pts[:, 0] ** i * pts[:, 1] ** j)
            assert got == pytest.approx(_monomial_integral(i, j), rel=1e-13)


@pytest.mark.parametrize("degree", [1, 2])
def test_reference_basis_partition_of_unity(degree):
    pts = np.random.default_rng(1).dirichlet([1, 1, 1], 20)[:, 1:]
    phi, dphi = reference_basis(degree, pts)
    assert np.allclose(phi.sum(axis=1), 1.0)
    assert np.allclose(dphi.sum(axis=1), 0.0)


@pytest.fixture(scope="module")
def oval_space():
    mesh = triangulate(BoundaryCurve.mode(3, 0.15), 0.1)
    return FESpace(mesh, 2)


def test_area_of_curved_mesh(oval_space):
    exact = area_perimeter(oval_space.mesh.curve)[0]
    assert abs(oval_space.area() - exact) < 1e-2 * abs(oval_space.mesh.area() - exact)
    assert oval_space.ones_load.sum() == pytest.approx(oval_space.area(), rel=1e-13)


def test_stiffness_kernel_and_symmetry(oval_space):
    K = oval_space.stiffness
    assert abs(K - K.T).max() < 1e-13
    assert np.abs(K @ np.ones(oval_space.n_dofs)).max() < 1e-11


def test_linear_reproduced_exactly_p1(oval_space):
    space = FESpace(oval_space.mesh, 1)
    f = lambda p: 0.3 + 2 * p[:, 0] - p[:, 1]
    u, _ = solve_poisson(space, 0.0, f(space.nodes[space.boundary_dofs]))
    assert np.abs(u - f(space.nodes)).max() < 1e-10


def test_quadratic_error_is_geometric_only(oval_space):
    # u = x^2 + y^2 - xy/2 solves Δu = 4; only curved cells perturb it
    f = lambda p: p[:, 0] ** 2 + p[:, 1] ** 2 - 0.5 * p[:, 0] * p[:, 1]
    errs = []
    for space in (oval_space, FESpace(refine(oval_space.mesh), 2)):
        u, _ = solve_poisson(space, 4.0, f(space.nodes[space.boundary_dofs]))
        errs.append(np.abs(u - f(space.nodes)).max())
    assert errs[0] < 1e-4
    assert errs[0] / errs[1] > 6


def test_consistent_flux_integrates_to_source(oval_space):
    u, _ = solve_poisson(oval_space, 2.0)
    flux, functional = consistent_flux(oval_space, u, 2.0)
    assert functional.sum() == pytest.approx(2.0 * oval_space.area(), rel=1e-10)
    ones = np.ones(len(flux))
    assert ones @ boundary_mass(oval_space) @ flux == pytest.approx(functional.sum(), rel=1e-10)


def test_boundary_mass_total_is_perimeter(oval_space):
    M = boundary_mass(oval_space)
    n = M.shape[0]
    assert np.ones(n) @ M @ np.ones(n) == pytest.approx(area_perimeter(oval_space.mesh.curve)[1],
                                                        rel=1e-6)


def test_boundary_quadrature(oval_space):
    bq = BoundaryQuadrature(oval_space)
    area, perim = area_perimeter(oval_space.mesh.curve)
    assert bq.integrate(np.ones_like(bq.theta)) == pytest.approx(perim, rel=1e-12)
    assert bq.integrate(np.sum(bq.points * bq.normal, axis=1)) == pytest.approx(2 * area, rel=1e-12)
    assert bq.integrate(bq.curvature) == pytest.approx(2 * math.pi, rel=1e-12)
    x = oval_space.nodes[:, 0]
    assert np.allclose(bq.interp @ x, bq.points[:, 0], atol=1e-4)


@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_patch_recovery_exact_on_quadratics(c):
    space = _small_space()
    x, y = space.nodes[:, 0], space.nodes[:, 1]
    u = c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y
    grad, hess = PatchRecovery(space).fit(u)
    v = space.mesh.vertices
    gx = c[1] + 2 * c[3] * v[:, 0] + c[4] * v[:, 1]
    gy = c[2] + c[4] * v[:, 0] + 2 * c[5] * v[:, 1]
    assert np.allclose(grad, np.stack([gx, gy], axis=1), atol=1e-9)
    H = np.array([[2 * c[3], c[4]], [c[4], 2 * c[5]]])
    assert np.allclose(hess, H, atol=1e-7)


@functools.lru_cache(maxsize=1)
def _small_space():
    return FESpace(triangulate(BoundaryCurve.mode(2, 0.1), 0.15), 2)


def test_pcg_matches_direct(oval_space):
    K = oval_space.stiffness
    I = oval_space.interior_dofs
    A = K[I][:, I].tocsc()
    b = np.random.default_rng(3).normal(size=len(I))
    x, its = pcg(A, b)
    assert its > 0
    assert np.allclose(x, spla.spsolve(A, b), rtol=1e-9, atol=1e-11)
    assert pcg(A, np.zeros(len(I)))[1] == 0


def test_pcg_iteration_cap(oval_space):
    K = oval_space.stiffness
    I = oval_space.interior_dofs
    with pytest.raises(SolverError):
        pcg(K[I][:, I], np.ones(len(I)), maxiter=3)


def test_inverted_element_rejected():
    mesh = triangulate(BoundaryCurve.circle(), 0.2)
    tri = mesh.triangles.copy()
    tri[0] = tri[0, [0, 2, 1]]
    bad = Mesh(mesh.vertices, tri, mesh.boundary_vertices, mesh.boundary_thetas, mesh.curve,
               mesh.h_max)
    with pytest.raises(AssemblyError):
        FESpace(bad, 1)
    with pytest.raises(ValueError):
        FESpace(mesh, 3)
