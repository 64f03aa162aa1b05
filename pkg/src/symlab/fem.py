"""Lagrange finite elements (P1, isoparametric P2) on a :class:`~symlab.mesh.Mesh`.

P2 elements adjacent to the boundary are curved: the midpoint node of every
boundary edge sits on the curve at the parameter midpoint.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Mesh

# Strang-Fix / Dunavant 7-point rule, degree 5, reference triangle of area 1/2.
_a1, _b1 = (6 - math.sqrt(15)) / 21, (9 + 2 * math.sqrt(15)) / 21
_a2, _b2 = (6 + math.sqrt(15)) / 21, (9 - 2 * math.sqrt(15)) / 21
_w1, _w2 = (155 - math.sqrt(15)) / 2400, (155 + math.sqrt(15)) / 2400
TRI7_POINTS = np.array([[1 / 3, 1 / 3],
                        [_a1, _a1], [_b1, _a1], [_a1, _b1],
                        [_a2, _a2], [_b2, _a2], [_a2, _b2]])
TRI7_WEIGHTS = np.array([9 / 80, _w1, _w1, _w1, _w2, _w2, _w2])


class AssemblyError(RuntimeError):
    pass


class SolverError(RuntimeError):
    pass


def duffy_rule(n: int):
    """Collapsed Gauss rule on the reference triangle, exact to degree 2n-2."""
    x, w = np.polynomial.legendre.leggauss(n)
    x, w = 0.5 * (x + 1), 0.5 * w
    u, v = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    xi = u * (1 - v)
    eta = v
    return np.column_stack([xi.ravel(), eta.ravel()]), (wu * wv * (1 - v)).ravel()


def reference_basis(degree: int, pts: np.ndarray):
    """Values (q, k) and reference gradients (q, k, 2) of the Lagrange basis."""
    xi, eta = pts[:, 0], pts[:, 1]
    l0, l1, l2 = 1 - xi - eta, xi, eta
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    if degree == 1:
        phi = np.stack([l0, l1, l2], axis=1)
        dphi = np.broadcast_to(dl, (len(pts), 3, 2)).copy()
        return phi, dphi
    if degree != 2:
        raise ValueError("degree must be 1 or 2")
    lam = [l0, l1, l2]
    phi = np.stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                    4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0], axis=1)
    dphi = np.empty((len(pts), 6, 2))
    for i in range(3):
        dphi[:, i] = (4 * lam[i] - 1)[:, None] * dl[i]
    for k, (a, b) in enumerate([(0, 1), (1, 2), (2, 0)]):
        dphi[:, 3 + k] = 4 * (lam[a][:, None] * dl[b] + lam[b][:, None] * dl[a])
    return phi, dphi


def edge_basis(degree: int, t: np.ndarray):
    """1-D Lagrange basis on [0, 1]; P2 node order (start, mid, end)."""
    if degree == 1:
        return np.stack([1 - t, t], axis=1), np.stack([-np.ones_like(t), np.ones_like(t)], axis=1)
    n = np.stack([(1 - t) * (1 - 2 * t), 4 * t * (1 - t), t * (2 * t - 1)], axis=1)
    dn = np.stack([4 * t - 3, 4 - 8 * t, 4 * t - 1], axis=1)
    return n, dn


class FESpace:
    """Degree-1 or degree-2 Lagrange space with precomputed element geometry."""

    def __init__(self, mesh: Mesh, degree: int = 2, quad=None):
        if degree not in (1, 2):
            raise ValueError("degree must be 1 or 2")
        self.mesh = mesh
        self.degree = degree
        tri = mesh.triangles
        nv = mesh.n_vertices
        be = mesh.boundary_edges
        if degree == 2:
            e_all = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
            edges, inv = np.unique(np.sort(e_all, axis=1), axis=0, return_inverse=True)
            inv = inv.reshape(3, -1).T
            nodes = np.concatenate([mesh.vertices,
                                    0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])])
            eid = {(int(a), int(b)): k for k, (a, b) in enumerate(edges)}
            b_edge = np.array([eid[(min(a, b), max(a, b))] for a, b in be.tolist()], dtype=np.int64)
            nodes[nv + b_edge] = mesh.curve.point(mesh.boundary_edge_thetas.mean(axis=1))
            self.cell_dofs = np.concatenate([tri, nv + inv], axis=1)
            self.boundary_edge_dofs = np.stack([be[:, 0], nv + b_edge, be[:, 1]], axis=1)
            self.edges = edges
        else:
            nodes = mesh.vertices.copy()
            self.cell_dofs = tri.copy()
            self.boundary_edge_dofs = be.copy()
            self.edges = mesh.edges()
        self.nodes = nodes
        self.n_dofs = len(nodes)
        self.boundary_dofs = np.unique(self.boundary_edge_dofs)
        self.is_boundary = np.zeros(self.n_dofs, dtype=bool)
        self.is_boundary[self.boundary_dofs] = True
        self.interior_dofs = np.flatnonzero(~self.is_boundary)

        qp, qw = quad if quad is not None else (TRI7_POINTS, TRI7_WEIGHTS)
        self.qp_ref, self.qw = qp, qw
        self.phi, dphi = reference_basis(degree, qp)
        X = nodes[self.cell_dofs]                               # (m, k, 2)
        J = np.einsum("mka,qkb->mqab", X, dphi)                 # dx_a / dxi_b
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        if np.any(det <= 0):
            raise AssemblyError(f"degenerate or inverted element (min det {det.min():.3g})")
        inv = np.empty_like(J)
        inv[..., 0, 0], inv[..., 1, 1] = J[..., 1, 1] / det, J[..., 0, 0] / det
        inv[..., 0, 1], inv[..., 1, 0] = -J[..., 0, 1] / det, -J[..., 1, 0] / det
        self.grads = np.einsum("mqba,qkb->mqka", inv, dphi)     # (m, q, k, 2)
        self.wdet = qw[None, :] * det                           # (m, q)
        self.xq = np.einsum("qk,mka->mqa", self.phi, X)         # (m, q, 2)
        # barycentric coordinates of quadrature points, for vertex-wise data
        self.bary = np.stack([1 - qp[:, 0] - qp[:, 1], qp[:, 0], qp[:, 1]], axis=1)
        self._K = None
        self._F = None

    # -- assembly ------------------------------------------------------------
    def _sparse(self, local: np.ndarray) -> sp.csr_matrix:
        k = self.cell_dofs.shape[1]
        rows = np.repeat(self.cell_dofs, k, axis=1).ravel()
        cols = np.tile(self.cell_dofs, (1, k)).ravel()
        return sp.coo_matrix((local.ravel(), (rows, cols)),
                             shape=(self.n_dofs, self.n_dofs)).tocsr()

    @property
    def stiffness(self) -> sp.csr_matrix:
        if self._K is None:
            loc = np.einsum("mq,mqia,mqja->mij", self.wdet, self.grads, self.grads)
            self._K = self._sparse(loc)
        return self._K

    @property
    def ones_load(self) -> np.ndarray:
        """``F_i = ∫ phi_i``."""
        if self._F is None:
            loc = np.einsum("mq,qi->mi", self.wdet, self.phi)
            self._F = np.bincount(self.cell_dofs.ravel(), loc.ravel(), minlength=self.n_dofs)
        return self._F

    def area(self) -> float:
        return float(self.wdet.sum())

    # -- evaluation at quadrature points -------------------------------------
    def values_qp(self, u: np.ndarray) -> np.ndarray:
        return np.einsum("qk,mk->mq", self.phi, u[self.cell_dofs])

    def grads_qp(self, u: np.ndarray) -> np.ndarray:
        return np.einsum("mqka,mk->mqa", self.grads, u[self.cell_dofs])

    def vertex_field_qp(self, v: np.ndarray) -> np.ndarray:
        """Linear interpolation of per-vertex data (any trailing shape)."""
        return np.einsum("qi,mi...->mq...", self.bary, v[self.mesh.triangles])

    def integrate(self, f_qp: np.ndarray) -> float:
        return float(np.einsum("mq,mq...->...", self.wdet, f_qp).sum())


def pcg(A, b, x0=None, rtol: float = 1e-12, maxiter: int | None = None):
    """Jacobi-preconditioned conjugate gradients; stops at ||r|| <= rtol ||b||."""
    n = len(b)
    maxiter = 10 * n if maxiter is None else maxiter
    dinv = 1.0 / A.diagonal()
    x = np.zeros(n) if x0 is None else x0.copy()
    r = b - A @ x
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(n), 0
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= rtol * bnorm:
            return x, it
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"CG did not reach rtol={rtol} in {maxiter} iterations "
                      f"(residual {np.linalg.norm(r) / bnorm:.3g})")


def solve_poisson(space: FESpace, source: float, boundary_values: np.ndarray | None = None,
                  rtol: float = 1e-12):
    """Galerkin solution of ``Δu = source`` with Dirichlet data on boundary dofs.

    Returns the dof vector and the CG iteration count.
    """
    K = space.stiffness
    u = np.zeros(space.n_dofs)
    if boundary_values is not None:
        u[space.boundary_dofs] = boundary_values
    I = space.interior_dofs
    rhs = -source * space.ones_load[I] - K[I] @ u
    KII = K[I][:, I]
    uI, its = pcg(KII, rhs, rtol=rtol)
    u[I] = uI
    return u, its


def boundary_mass(space: FESpace, n_gauss: int = 6) -> sp.csr_matrix:
    """Mass matrix of the boundary trace space on the (isoparametric) boundary edges."""
    t, w = np.polynomial.legendre.leggauss(n_gauss)
    t, w = 0.5 * (t + 1), 0.5 * w
    nb, dn = edge_basis(space.degree, t)
    bd = space.boundary_edge_dofs
    X = space.nodes[bd]                                        # (e, k, 2)
    dx = np.einsum("qk,eka->eqa", dn, X)
    ds = np.linalg.norm(dx, axis=-1) * w[None, :]
    loc = np.einsum("eq,qi,qj->eij", ds, nb, nb)
    k = bd.shape[1]
    rows = np.repeat(bd, k, axis=1).ravel()
    cols = np.tile(bd, (1, k)).ravel()
    M = sp.coo_matrix((loc.ravel(), (rows, cols)), shape=(space.n_dofs, space.n_dofs)).tocsr()
    B = space.boundary_dofs
    return M[B][:, B]


def consistent_flux(space: FESpace, u: np.ndarray, source: float):
    """Normal derivative on the boundary from the Galerkin residual.

    For ``Δu = f`` and boundary test functions phi_i,
    ``∮ u_ν phi_i = ∫ ∇u·∇phi_i + ∫ f phi_i``; the trace is recovered by a
    boundary mass-matrix solve.  Returns (flux on boundary dofs, functional).
    """
    B = space.boundary_dofs
    functional = (space.stiffness @ u + source * space.ones_load)[B]
    flux = spla.spsolve(boundary_mass(space).tocsc(), functional)
    return flux, functional


class BoundaryQuadrature:
    """Gauss rule on the exact curve, edge by edge in the boundary parameter.

    ``interp @ v`` maps a global dof vector to its boundary trace at the nodes.
    """

    def __init__(self, space: FESpace, n_gauss: int = 6):
        mesh = space.mesh
        curve = mesh.curve
        t, w = np.polynomial.legendre.leggauss(n_gauss)
        t, w = 0.5 * (t + 1), 0.5 * w
        et = mesh.boundary_edge_thetas
        dth = et[:, 1] - et[:, 0]
        theta = et[:, :1] + dth[:, None] * t[None, :]
        self.theta = theta.ravel()
        self.weights = (dth[:, None] * w[None, :]).ravel() * curve.speed(self.theta)
        p, d1, _ = curve.derivatives(self.theta)
        self.points = p
        self.tangent = d1 / np.linalg.norm(d1, axis=1, keepdims=True)
        self.normal = np.stack([self.tangent[:, 1], -self.tangent[:, 0]], axis=1)
        self.curvature = curve.curvature(self.theta)
        nb, _ = edge_basis(space.degree, t)
        bd = space.boundary_edge_dofs
        ne, k = bd.shape
        rows = np.repeat(np.arange(ne * n_gauss), k)
        cols = np.repeat(bd, n_gauss, axis=0).ravel()
        vals = np.tile(nb, (ne, 1)).ravel()
        self.interp = sp.coo_matrix((vals, (rows, cols)),
                                    shape=(ne * n_gauss, space.n_dofs)).tocsr()

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f))


# ---------------------------------------------------------------------------
# patch recovery
# ---------------------------------------------------------------------------

def _patch_incidence(space: FESpace, two_ring: np.ndarray):
    """Sparse (nv x n_dofs) pattern of the dofs used to fit each vertex."""
    mesh = space.mesh
    nv, m = mesh.n_vertices, len(mesh.triangles)
    A = sp.csr_matrix((np.ones(3 * m), (mesh.triangles.ravel(), np.repeat(np.arange(m), 3))),
                      shape=(nv, m))
    k = space.cell_dofs.shape[1]
    C = sp.csr_matrix((np.ones(m * k), (np.repeat(np.arange(m), k), space.cell_dofs.ravel())),
                      shape=(m, space.n_dofs))
    one = (A @ C)
    if np.any(two_ring):
        V = (A @ A.T)
        D = sp.diags(two_ring.astype(float))
        two = (D @ V @ A @ C)
        one = sp.diags((~two_ring).astype(float)) @ one + two
    one = one.tocsr()
    one.data[:] = 1.0
    one.sort_indices()
    return one


def _monomials(d: np.ndarray, order: int) -> np.ndarray:
    x, y = d[..., 0], d[..., 1]
    cols = [np.ones_like(x), x, y, x * x, x * y, y * y]
    if order >= 3:
        cols += [x ** 3, x * x * y, x * y * y, y ** 3]
    return np.stack(cols, axis=-1)


class PatchRecovery:
    """Per-vertex least-squares polynomial fits over element patches.

    Boundary vertices (and vertices whose one-ring is too small for the fit)
    use the two-ring patch.
    """

    def __init__(self, space: FESpace, order: int = 2):
        self.space = space
        self.order = order
        mesh = space.mesh
        nv = mesh.n_vertices
        ncoef = 6 if order == 2 else 10
        two = np.zeros(nv, dtype=bool)
        two[mesh.boundary_vertices] = True
        P = _patch_incidence(space, two)
        counts = np.diff(P.indptr)
        small = counts < ncoef + 3
        if np.any(small & ~two):
            two |= small
            P = _patch_incidence(space, two)
            counts = np.diff(P.indptr)
        width = counts.max()
        idx = np.zeros((nv, width), dtype=np.int64)
        mask = np.arange(width)[None, :] < counts[:, None]
        idx[mask] = P.indices
        self.idx, self.mask = idx, mask
        d = space.nodes[idx] - mesh.vertices[:, None, :]
        scale = np.sqrt(np.max(np.where(mask, np.sum(d * d, axis=-1), 0.0), axis=1))
        self.scale = scale
        V = _monomials(d / scale[:, None, None], order) * mask[..., None]
        self.V = V
        self.gram = np.einsum("nki,nkj->nij", V, V)

    def fit(self, values: np.ndarray):
        """Gradient (nv, 2) and Hessian (nv, 2, 2) at the vertices."""
        rhs = np.einsum("nki,nk->ni", self.V, values[self.idx] * self.mask)
        c = np.linalg.solve(self.gram, rhs[..., None])[..., 0]
        s = self.scale
        grad = c[:, 1:3] / s[:, None]
        hess = np.empty((len(s), 2, 2))
        hess[:, 0, 0] = 2 * c[:, 3] / s**2
        hess[:, 0, 1] = hess[:, 1, 0] = c[:, 4] / s**2
        hess[:, 1, 1] = 2 * c[:, 5] / s**2
        return grad, hess
