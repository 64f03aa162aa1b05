"""The harmonic function ``h = q − u`` with ``q = ½(|x−z|² − a)`` and its Hessian deficits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fem import BoundaryQuadrature, consistent_flux
from .geometry import N_DIM, GeometrySummary
from .mesh import Mesh
from .torsion import ScalarField, critical_point, solve_field


class PreconditionError(ValueError):
    pass


def quadratic(z, a: float):
    z = np.asarray(z, dtype=float)
    return lambda x: 0.5 * (np.sum((np.asarray(x) - z) ** 2, axis=-1) - a)


def hessian_norm2_qp(field_: ScalarField) -> np.ndarray:
    """``|∇²w|²`` at quadrature points from the recovered vertex Hessians."""
    Hq = field_.space.vertex_field_qp(field_.recovered_hessian)
    return np.einsum("mqij,mqij->mq", Hq, Hq)


def newton_deficit_qp(field_: ScalarField) -> np.ndarray:
    """``|∇²w|² − (Δw)²/N`` at quadrature points."""
    Hq = field_.space.vertex_field_qp(field_.recovered_hessian)
    tr = Hq[..., 0, 0] + Hq[..., 1, 1]
    return np.einsum("mqij,mqij->mq", Hq, Hq) - tr**2 / N_DIM


@dataclass(frozen=True, eq=False)
class HarmonicBundle:
    z: np.ndarray
    a: float
    h: ScalarField
    h_from_difference: ScalarField
    oscillation: float
    weighted_deficit: float
    unweighted_deficit: float
    boundary_max: float = field(default=0.0)
    boundary_min: float = field(default=0.0)

    @property
    def difference_gap(self) -> float:
        """Max-norm distance between the harmonic solve and ``q − u``."""
        return float(np.max(np.abs(self.h.dof_values - self.h_from_difference.dof_values)))

    def summary(self) -> dict:
        return {"z": [float(self.z[0]), float(self.z[1])], "a": float(self.a),
                "oscillation": self.oscillation,
                "weighted_deficit": self.weighted_deficit,
                "unweighted_deficit": self.unweighted_deficit,
                "difference_gap": self.difference_gap}


def build_harmonic(mesh: Mesh, torsion: ScalarField, z=None, a: float = 0.0,
                   n_osc: int = 8) -> HarmonicBundle:
    if torsion.mesh is not mesh:
        raise PreconditionError("torsion field lives on a different mesh")
    z = critical_point(torsion) if z is None else np.asarray(z, dtype=float)
    if not bool(mesh.curve.contains(z[None, :])[0]):
        raise PreconditionError(f"z = {z.tolist()} is not inside the domain")
    q = quadratic(z, a)
    space = torsion.space
    h = solve_field(mesh, torsion.degree, 0.0, boundary_values=q, space=space,
                    recovery=torsion.recovery)
    diff = q(space.nodes) - torsion.dof_values
    flux, functional = consistent_flux(space, diff, 0.0)
    grad, hess = torsion.recovery.fit(diff)
    pos = np.searchsorted(space.boundary_dofs, mesh.boundary_vertices)
    hd = ScalarField(mesh=mesh, degree=torsion.degree, dof_values=diff, recovered_gradient=grad,
                     recovered_hessian=hess, boundary_flux=flux[pos], space=space,
                     flux_dofs=flux, flux_functional=functional, recovery=torsion.recovery)
    # dense sampling of the boundary trace
    bq = BoundaryQuadrature(space, n_osc)
    trace = np.concatenate([bq.interp @ h.dof_values, h.dof_values[space.boundary_dofs]])
    hmax, hmin = float(trace.max()), float(trace.min())
    hn2 = hessian_norm2_qp(h)
    weighted = space.integrate(-space.values_qp(torsion.dof_values) * hn2)
    unweighted = space.integrate(hn2)
    return HarmonicBundle(z=z, a=float(a), h=h, h_from_difference=hd, oscillation=hmax - hmin,
                          weighted_deficit=weighted, unweighted_deficit=unweighted,
                          boundary_max=hmax, boundary_min=hmin)


def hessian_deficit_consistency(torsion: ScalarField, bundle: HarmonicBundle,
                                eps: float = 1e-14) -> float:
    """Relative gap between ``∫|∇²h|²`` and ``∫(|∇²u|² − (Δu)²/N)``."""
    if bundle.h.space is not torsion.space:
        raise PreconditionError("fields live on different meshes")
    a = bundle.unweighted_deficit
    b = torsion.space.integrate(newton_deficit_qp(torsion))
    return abs(a - b) / max(abs(a), abs(b), eps)


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def oscillation_constants(p: float, n: int = N_DIM) -> dict:
    """``α_{N,p}`` and ``a_{N,p}``: as printed, and re-derived by maximizing a ball estimate."""
    B = unit_ball_volume(n)
    alpha = (p / n) * B ** (1 / p)
    common = 2 * (n + p) / p ** (p / (n + p))
    printed = common / n ** (n / (n + 2)) * B ** (1 / (n + p))
    derived = common / n ** (n / (n + p)) * B ** (-1 / (n + p))
    return {"alpha": alpha, "a_printed": printed, "a_derived": derived}


@dataclass(frozen=True)
class OscillationReport:
    p: float
    lp_norm: float
    G: float
    smallness_lhs: float
    smallness_rhs: float
    applicable: bool
    oscillation: float
    bound_printed: float
    bound_derived: float
    passed_printed: bool
    passed_derived: bool
    disagree: bool

    @property
    def margin(self) -> float:
        return self.bound_printed - self.oscillation


def oscillation_lemma_check(bundle: HarmonicBundle, geometry: GeometrySummary, p: float = 2.0,
                            torsion: ScalarField | None = None, M: float | None = None,
                            rtol: float = 1e-9) -> OscillationReport:
    """Oscillation of ``h`` on Γ against its ``L^p`` deviation from the mean.

    ``G = M + d`` bounds ``|∇h|``; ``M`` defaults to the largest recovered
    ``|∇u|`` (vertices and boundary flux) when ``torsion`` is given.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if M is None:
        if torsion is None:
            raise ValueError("either M or torsion is required")
        M = max(float(np.max(np.linalg.norm(torsion.recovered_gradient, axis=1))),
                float(np.max(torsion.flux_dofs)))
    space = bundle.h.space
    hq = space.values_qp(bundle.h.dof_values)
    area = space.area()
    mean = space.integrate(hq) / area
    lp = space.integrate(np.abs(hq - mean) ** p) ** (1 / p)
    G = M + geometry.diameter
    c = oscillation_constants(p)
    small_rhs = c["alpha"] * geometry.r_i ** ((N_DIM + p) / p) * G
    e = (N_DIM / (N_DIM + p), p / (N_DIM + p))
    bp = c["a_printed"] * G ** e[0] * lp ** e[1]
    bd = c["a_derived"] * G ** e[0] * lp ** e[1]
    osc = bundle.oscillation
    tol = rtol * max(1.0, geometry.diameter ** 2)
    pp, pd = osc <= bp + tol, osc <= bd + tol
    return OscillationReport(p, lp, G, lp, small_rhs, lp <= small_rhs, osc, bp, bd,
                             bool(pp), bool(pd), bool(pp != pd))
