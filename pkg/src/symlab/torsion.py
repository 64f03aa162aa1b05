"""Torsion problem ``Δu = N`` in Ω, ``u = 0`` on Γ, with flux and derivative recovery."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .fem import BoundaryQuadrature, FESpace, PatchRecovery, consistent_flux, solve_poisson
from .geometry import N_DIM
from .mesh import Mesh


class ConsistencyError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Finite element function with recovered derivatives and boundary flux.

    ``boundary_flux`` is indexed like ``mesh.boundary_vertices``;
    ``flux_dofs`` holds the full trace on ``space.boundary_dofs``.
    """
    mesh: Mesh
    degree: int
    dof_values: np.ndarray
    recovered_gradient: np.ndarray
    recovered_hessian: np.ndarray
    boundary_flux: np.ndarray
    space: FESpace = field(repr=False)
    flux_dofs: np.ndarray = field(repr=False)
    flux_functional: np.ndarray = field(repr=False)
    recovery: PatchRecovery = field(repr=False, default=None)
    cg_iterations: int = 0

    @property
    def vertex_values(self) -> np.ndarray:
        return self.dof_values[: self.mesh.n_vertices]

    def flux_global(self) -> np.ndarray:
        """Flux as a global dof vector (zero at interior dofs)."""
        g = np.zeros(self.space.n_dofs)
        g[self.space.boundary_dofs] = self.flux_dofs
        return g

    def to_dict(self) -> dict:
        return {"degree": self.degree,
                "nodes": self.space.nodes.tolist(),
                "dof_values": self.dof_values.tolist(),
                "boundary_dofs": self.space.boundary_dofs.tolist(),
                "boundary_flux": self.flux_dofs.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def vertex_csv(self) -> str:
        flux = np.full(self.mesh.n_vertices, np.nan)
        flux[self.mesh.boundary_vertices] = self.boundary_flux
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "u", "ux", "uy", "flux"])
        for (x, y), u, (gx, gy), f in zip(self.mesh.vertices, self.vertex_values,
                                          self.recovered_gradient, flux):
            w.writerow([repr(float(x)), repr(float(y)), repr(float(u)), repr(float(gx)),
                        repr(float(gy)), "" if np.isnan(f) else repr(float(f))])
        return buf.getvalue()


def field_from_dofs(mesh: Mesh, degree: int, u: np.ndarray, source: float,
                    space: FESpace | None = None,
                    recovery: PatchRecovery | None = None) -> ScalarField:
    """Wrap known dof values (e.g. from a cache) with flux and recovered derivatives."""
    space = FESpace(mesh, degree) if space is None else space
    if len(u) != space.n_dofs:
        raise ValueError("dof vector does not match the space")
    flux, functional = consistent_flux(space, u, source)
    recovery = PatchRecovery(space) if recovery is None else recovery
    grad, hess = recovery.fit(u)
    pos = np.searchsorted(space.boundary_dofs, mesh.boundary_vertices)
    return ScalarField(mesh=mesh, degree=degree, dof_values=u, recovered_gradient=grad,
                       recovered_hessian=hess, boundary_flux=flux[pos], space=space,
                       flux_dofs=flux, flux_functional=functional, recovery=recovery)


def solve_field(mesh: Mesh, degree: int, source: float, boundary_values=None,
                space: FESpace | None = None, recovery: PatchRecovery | None = None) -> ScalarField:
    """Solve ``Δw = source`` with Dirichlet data (function of boundary dof coordinates)."""
    space = FESpace(mesh, degree) if space is None else space
    g = None
    if boundary_values is not None:
        g = boundary_values(space.nodes[space.boundary_dofs])
    u, its = solve_poisson(space, source, g)
    f = field_from_dofs(mesh, degree, u, source, space, recovery)
    return dataclasses.replace(f, cg_iterations=its)


def solve_torsion(mesh: Mesh, degree: int = 2, space: FESpace | None = None) -> ScalarField:
    """Galerkin solution of ``Δu = 2`` with ``u = 0`` on the boundary."""
    f = solve_field(mesh, degree, float(N_DIM), space=space)
    check_torsion(f)
    return f


def check_torsion(f: ScalarField) -> None:
    if np.any(f.dof_values > 1e-12 * max(1.0, -f.dof_values.min())):
        raise ConsistencyError("torsion solution is not non-positive")


def critical_point(field: ScalarField) -> np.ndarray:
    """Global minimizer of ``u``: best dof refined by one Newton step on a local quadratic."""
    space = field.space
    u = field.dof_values
    umin = u.min()
    cand = np.flatnonzero(u == umin)
    if len(cand) > 1:
        nodes = space.nodes[cand]
        cand = cand[np.lexsort((nodes[:, 1], nodes[:, 0]))]
    k = int(cand[0])
    if space.is_boundary[k]:
        raise ConsistencyError("minimizer of u lies on the boundary")
    cells = np.flatnonzero(np.any(space.cell_dofs == k, axis=1))
    verts = np.unique(space.mesh.triangles[cells])
    cells = np.flatnonzero(np.isin(space.mesh.triangles, verts).any(axis=1))
    idx = np.unique(space.cell_dofs[cells])
    x0 = space.nodes[k]
    d = space.nodes[idx] - x0
    s = np.sqrt(np.max(np.sum(d * d, axis=1)))
    x, y = d[:, 0] / s, d[:, 1] / s
    A = np.stack([np.ones_like(x), x, y, x * x, x * y, y * y], axis=1)
    c, *_ = np.linalg.lstsq(A, u[idx], rcond=None)
    g = c[1:3]
    H = np.array([[2 * c[3], c[4]], [c[4], 2 * c[5]]])
    z = x0.copy()
    if np.all(np.linalg.eigvalsh(H) > 0):
        step = -np.linalg.solve(H, g)
        if np.linalg.norm(step) <= 1.0:
            z = x0 + s * step
    if not bool(field.mesh.curve.contains(z[None, :])[0]):
        raise ConsistencyError("critical point is not interior")
    return z


@dataclass(frozen=True)
class TorsionalRigidity:
    volume_form: float
    energy_form: float
    relative_gap: float

    @property
    def value(self) -> float:
        return self.energy_form


def torsional_rigidity(field: ScalarField) -> TorsionalRigidity:
    sp_ = field.space
    u = field.dof_values
    vol = -N_DIM * float(sp_.ones_load @ u)
    en = float(u @ (sp_.stiffness @ u))
    return TorsionalRigidity(vol, en, abs(en - vol) / max(abs(en), abs(vol)))


def cauchy_schwarz_deficit(field: ScalarField) -> np.ndarray:
    """Per-vertex ``|∇²u|² − (Δu)²/N`` from the recovered Hessian."""
    H = field.recovered_hessian
    return np.einsum("nij,nij->n", H, H) - (H[:, 0, 0] + H[:, 1, 1]) ** 2 / N_DIM


def boundary_quadrature(field: ScalarField, n_gauss: int = 6) -> BoundaryQuadrature:
    return BoundaryQuadrature(field.space, n_gauss)
