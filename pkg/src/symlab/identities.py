"""Integral identities for the torsion problem as residual checks.

Boundary integrals use the exact curve (normal, curvature, ``q_ν``) and the
recovered flux; volume integrals use element quadrature.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import BoundaryQuadrature
from .geometry import N_DIM, BoundaryCurve, GeometrySummary, geometry_summary
from .harmonic import (HarmonicBundle, PreconditionError, build_harmonic, hessian_norm2_qp,
                       newton_deficit_qp)
from .mesh import triangulate
from .torsion import ScalarField, solve_torsion

IDENTITY_IDS = ("volume", "minkowski", "pohozaev", "serrin", "serrin_h", "fundamental",
                "sbt", "sbt2", "heintze_karcher", "trace_v")

# length exponent d of each identity's natural scale R^d |Γ|
_SCALE_EXP = {"volume": 1, "minkowski": 0, "pohozaev": 3, "serrin": 3, "serrin_h": 3,
              "fundamental": 1, "sbt": 1, "sbt2": 1, "heintze_karcher": 1, "trace_v": 3}

RESIDUAL_FLOOR = 1e-4


@dataclass(frozen=True)
class IdentityResidual:
    identity_id: str
    lhs: float
    rhs: float
    relative_residual: float
    applicable: bool
    reason: str = ""
    scale: float = 1.0

    def to_dict(self) -> dict:
        return {"id": self.identity_id, "lhs": self.lhs, "rhs": self.rhs,
                "residual": self.relative_residual, "applicable": self.applicable,
                "reason": self.reason}


def relative_residual(lhs: float, rhs: float, eps: float) -> float:
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), eps)


class BoundaryData:
    """Everything sampled at the boundary Gauss points for one (u, h) pair."""

    def __init__(self, torsion: ScalarField, bundle: HarmonicBundle, n_gauss: int = 6):
        bq = BoundaryQuadrature(torsion.space, n_gauss)
        self.bq = bq
        self.w = bq.weights
        self.H = bq.curvature
        self.u_nu = bq.interp @ torsion.flux_global()
        self.h_nu = bq.interp @ bundle.h.flux_global()
        rel = bq.points - bundle.z
        self.q_nu = np.einsum("ij,ij->i", rel, bq.normal)
        self.q_tau = np.einsum("ij,ij->i", rel, bq.tangent)
        self.h_val = bq.interp @ bundle.h.dof_values

    def integral(self, f) -> float:
        return float(np.dot(self.w, f))


def check_identity(identity_id: str, torsion: ScalarField, bundle: HarmonicBundle,
                   geometry: GeometrySummary, aux: dict | None = None,
                   boundary: BoundaryData | None = None,
                   floor: float = RESIDUAL_FLOOR) -> IdentityResidual:
    """Evaluate both sides of one identity.

    ``aux`` options: ``v`` in {"h", "linear"} and ``form`` in {"gradient", "value"}
    for ``trace_v``.
    """
    if identity_id not in IDENTITY_IDS:
        raise ValueError(f"unknown identity {identity_id!r}")
    if bundle.h.space is not torsion.space:
        raise PreconditionError("fields live on different meshes")
    aux = aux or {}
    sp_ = torsion.space
    bd = BoundaryData(torsion, bundle) if boundary is None else boundary
    I = bd.integral
    N = N_DIM
    R, H0 = geometry.R, geometry.H0
    area = geometry.area
    u = torsion.dof_values
    uq = sp_.values_qp(u)
    un, qn, H = bd.u_nu, bd.q_nu, bd.H
    scale = R ** _SCALE_EXP[identity_id] * geometry.perimeter

    def cs_integral():
        return sp_.integrate(newton_deficit_qp(torsion)) / (N - 1)

    applicable, reason = True, ""
    if identity_id == "volume":
        lhs, rhs = I(un), N * area
    elif identity_id == "minkowski":
        lhs, rhs = I(H * qn), geometry.perimeter
    elif identity_id == "pohozaev":
        lhs, rhs = (N + 2) * float(u @ (sp_.stiffness @ u)), I(un**2 * qn)
    elif identity_id == "serrin":
        lhs = sp_.integrate(-uq * newton_deficit_qp(torsion))
        rhs = 0.5 * I((un**2 - R**2) * (un - qn))
    elif identity_id == "serrin_h":
        lhs = bundle.weighted_deficit
        rhs = 0.5 * I((R**2 - un**2) * bd.h_nu)
    elif identity_id == "fundamental":
        lhs, rhs = cs_integral(), N * area - I(H * un**2)
    elif identity_id == "sbt":
        lhs = cs_integral() + I((un - R) ** 2) / R
        rhs = I((H0 - H) * un**2)
    elif identity_id == "sbt2":
        lhs = cs_integral() + I((un - R) ** 2) / R
        rhs = I((H0 - H) * (un - qn) * un) + I((H0 - H) * (un - R) * qn)
    elif identity_id == "heintze_karcher":
        if np.min(H) <= 0:
            return IdentityResidual(identity_id, float("nan"), float("nan"), 0.0, False,
                                    "H <= 0 somewhere", scale)
        lhs = cs_integral() + I((1 - H * un) ** 2 / H)
        rhs = I(1 / H) - N * area
    else:
        lhs, rhs, scale = _trace_identity(torsion, bundle, bd, aux, R, geometry.perimeter)
    lhs, rhs = float(lhs), float(rhs)
    return IdentityResidual(identity_id, lhs, rhs, relative_residual(lhs, rhs, floor * scale),
                            applicable, reason, float(scale))


def _trace_identity(torsion, bundle, bd, aux, R, perimeter):
    """``∮|∇v|² u_ν = N∫|∇v|² + 2∫(−u)|∇²v|²`` or ``∮v² u_ν = N∫v² + 2∫(−u)|∇v|²``."""
    v_kind = aux.get("v", "h")
    form = aux.get("form", "gradient")
    if v_kind not in ("h", "linear") or form not in ("gradient", "value"):
        raise ValueError(f"bad trace_v options {aux!r}")
    sp_ = torsion.space
    N = N_DIM
    uq = sp_.values_qp(torsion.dof_values)
    un = bd.u_nu
    if v_kind == "linear":
        z = bundle.z
        vq = sp_.xq[..., 0] - z[0]
        gq2 = np.ones_like(vq)
        hess2 = np.zeros_like(vq)
        vb = bd.bq.points[:, 0] - z[0]
        gb2 = np.ones_like(vb)
        d = 1
    else:
        h = bundle.h
        vq = sp_.values_qp(h.dof_values)
        gq2 = np.sum(sp_.grads_qp(h.dof_values) ** 2, axis=-1)
        hess2 = hessian_norm2_qp(h)
        vb = bd.h_val
        gb2 = bd.q_tau**2 + bd.h_nu**2
        d = 3
    if form == "gradient":
        lhs = bd.integral(gb2 * un)
        rhs = N * sp_.integrate(gq2) + 2 * sp_.integrate(-uq * hess2)
    else:
        lhs = bd.integral(vb**2 * un)
        rhs = N * sp_.integrate(vq**2) + 2 * sp_.integrate(-uq * gq2)
        d += 2
    return lhs, rhs, R**d * perimeter


def run_checks(torsion: ScalarField, bundle: HarmonicBundle, geometry: GeometrySummary,
               floor: float = RESIDUAL_FLOOR) -> list[IdentityResidual]:
    bd = BoundaryData(torsion, bundle)
    return [check_identity(i, torsion, bundle, geometry, boundary=bd, floor=floor)
            for i in IDENTITY_IDS]


def identity_suite(curve: BoundaryCurve, h_max: float, degree: int = 2,
                   floor: float = RESIDUAL_FLOOR, mesh=None) -> list[IdentityResidual]:
    """All identities in fixed order for one domain and resolution."""
    mesh = triangulate(curve, h_max) if mesh is None else mesh
    geo = geometry_summary(curve)
    u = solve_torsion(mesh, degree)
    bundle = build_harmonic(mesh, u)
    return run_checks(u, bundle, geo, floor)
