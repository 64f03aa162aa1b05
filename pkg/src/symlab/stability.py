"""Deficits, explicit-constant inequality checks and stability-exponent sweeps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import (N_DIM, BoundaryCurve, GeometrySummary, asymmetry, distance_to_boundary,
                       geometry_summary, radii_at, symmetric_difference_ratio, theta_grid)
from .harmonic import build_harmonic
from .identities import BoundaryData, IdentityResidual, run_checks
from .mesh import triangulate
from .torsion import critical_point, solve_torsion

DEFICIT_NAMES = ("serrin_L2", "serrin_L1", "sbt_L2", "sbt_plus", "hk_deficit", "obvp_deficit")

# expected exponent of rho_gap against each deficit in the plane (tau_2 = 1)
EXPECTED_EXPONENT = {"serrin_L2": 1.0, "serrin_L1": 0.5, "sbt_L2": 1.0, "sbt_plus": 0.5,
                     "hk_deficit": 0.5, "obvp_deficit": 0.5}

GRADIENT_CONSTANT = 1.5  # c_N for N = 2


@dataclass(frozen=True)
class DeficitReport:
    geometry: GeometrySummary
    z: tuple[float, float]
    rho_i: float
    rho_e: float
    rho_gap: float
    serrin_L2: float
    serrin_L1: float
    sbt_L2: float
    sbt_plus: float
    hk_deficit: float | None
    obvp_deficit: float
    asymmetry: float
    asymmetry_at_z: float
    identity_residuals: tuple[IdentityResidual, ...]
    min_flux: float
    max_flux: float
    max_grad: float
    min_curvature: float
    boundary_length: float
    distance_ratio_quadratic: float
    distance_ratio_linear: float
    h_max: float
    degree: int
    n_vertices: int

    @property
    def convex(self) -> bool:
        return self.min_curvature > 0

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items()
             if k not in ("geometry", "identity_residuals")}
        d["z"] = [float(self.z[0]), float(self.z[1])]
        d["geometry"] = self.geometry.to_dict()
        d["identity_residuals"] = [r.to_dict() for r in self.identity_residuals]
        return json_safe(d)


def json_safe(x):
    if isinstance(x, dict):
        return {k: json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [json_safe(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    return x


def deficit_report(curve: BoundaryCurve, h_max: float, degree: int = 2, mesh=None,
                   solver=None) -> DeficitReport:
    """All deficits for one domain at one resolution.

    ``solver(curve, h_max, degree)`` may supply a cached ``(mesh, torsion)`` pair.
    """
    geo = geometry_summary(curve)
    if solver is not None:
        mesh, u = solver(curve, h_max, degree)
    else:
        mesh = triangulate(curve, h_max) if mesh is None else mesh
        u = solve_torsion(mesh, degree)
    z = critical_point(u)
    bundle = build_harmonic(mesh, u, z)
    bd = BoundaryData(u, bundle)
    I = bd.integral
    R, H0 = geo.R, geo.H0
    un, H = bd.u_nu, bd.H
    radii = radii_at(curve, z)
    convex = bool(np.min(curve.curvature(theta_grid(4096))) > 0)
    n_area = N_DIM * u.space.area()
    hk = I(1 / H) - n_area if convex else None
    # ∮u_ν as the total flux functional, so obvp and hk share the same data
    obvp = I(1 / H) - float(np.sum(u.flux_functional)) if convex else float("nan")
    asym = asymmetry(curve, R)
    poly = curve.point(theta_grid(8192))
    asym_z = float(symmetric_difference_ratio(poly, z, R))
    # distance-function bounds at mesh vertices
    verts = mesh.vertices
    interior = np.setdiff1d(np.arange(mesh.n_vertices), mesh.boundary_vertices)
    delta = distance_to_boundary(curve, verts[interior])
    mu = -u.vertex_values[interior]
    ratio_q = float(np.min(mu / (0.5 * delta**2)))
    ratio_l = float(np.min(mu / (0.5 * geo.r_i * delta)))
    grads = np.linalg.norm(u.recovered_gradient, axis=1)
    residuals = tuple(run_checks(u, bundle, geo))
    return DeficitReport(
        geometry=geo, z=(float(z[0]), float(z[1])), rho_i=radii.rho_i, rho_e=radii.rho_e,
        rho_gap=radii.rho_e - radii.rho_i,
        serrin_L2=math.sqrt(I((un - R) ** 2)), serrin_L1=I(np.abs(un - R)),
        sbt_L2=math.sqrt(I((H0 - H) ** 2)), sbt_plus=I(np.maximum(H0 - H, 0.0)),
        hk_deficit=hk, obvp_deficit=obvp, asymmetry=asym.value, asymmetry_at_z=asym_z,
        identity_residuals=residuals, min_flux=float(np.min(u.flux_dofs)),
        max_flux=float(np.max(u.flux_dofs)),
        max_grad=max(float(grads.max()), float(np.max(u.flux_dofs))),
        min_curvature=float(np.min(H)), boundary_length=float(np.sum(bd.w)),
        distance_ratio_quadratic=ratio_q, distance_ratio_linear=ratio_l,
        h_max=float(h_max), degree=int(degree), n_vertices=int(mesh.n_vertices))


@dataclass(frozen=True)
class BoundCheck:
    name: str
    lhs: float
    rhs: float
    passed: bool

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def to_dict(self) -> dict:
        return json_safe({"name": self.name, "lhs": self.lhs, "rhs": self.rhs,
                           "margin": self.margin, "passed": self.passed})


def explicit_bound_checks(report: DeficitReport, slack: float = 0.02,
                          abs_tol: float = 1e-6) -> list[BoundCheck]:
    """Each inequality ``lhs ≤ rhs`` is accepted if ``lhs ≤ (1+slack)·rhs + abs_tol``.

    Lower bounds are rewritten in that form; the distance bounds use half the slack.
    """
    g = report.geometry
    d, r_i, r_e = g.diameter, g.r_i, g.r_e
    out = []

    def add(name, lhs, rhs, s=slack):
        out.append(BoundCheck(name, float(lhs), float(rhs), bool(lhs <= (1 + s) * rhs + abs_tol)))

    add("gradient_lower", r_i, report.min_flux)
    upper = GRADIENT_CONSTANT * d if math.isinf(r_e) else GRADIENT_CONSTANT * d * (d + r_e) / r_e
    add("gradient_upper", report.max_flux, upper)
    add("distance_quadratic", 1.0, report.distance_ratio_quadratic, slack / 2)
    add("distance_linear", 1.0, report.distance_ratio_linear, slack / 2)
    r_low = min(r_i, r_e)
    const = max(2 * d, d * d / (2 * r_low))
    add("comparing_asymmetry", report.rho_gap, const * report.asymmetry ** (1 / N_DIM))
    R = g.R
    pe, pi_ = report.rho_e, report.rho_i
    add("asymmetry_remark_shell", report.asymmetry_at_z, (pe**N_DIM - pi_**N_DIM) / R**N_DIM)
    add("asymmetry_remark", report.asymmetry_at_z,
        N_DIM * pe ** (N_DIM - 1) * (pe - pi_) / R**N_DIM)
    return out


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Fit:
    deficit: str
    slope: float
    intercept: float
    r2: float
    n_points: int
    expected: float
    accepted: bool

    def to_dict(self) -> dict:
        return json_safe(self.__dict__)


def loglog_fit(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    """OLS of log y on log x: (slope, intercept, R²)."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    ss = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 0.0
    return float(coef[0]), float(coef[1]), r2


@dataclass(frozen=True)
class SweepResult:
    family_id: str
    epsilons: tuple[float, ...]
    h_values: tuple[float, ...]
    reports: tuple[DeficitReport, ...]
    fitted_exponents: dict
    ratio_tables: dict
    notes: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return json_safe({"family_id": self.family_id, "epsilons": list(self.epsilons),
                           "h_values": list(self.h_values),
                           "reports": [r.to_dict() for r in self.reports],
                           "fitted_exponents": {k: v.to_dict()
                                                for k, v in self.fitted_exponents.items()},
                           "ratio_tables": self.ratio_tables, "notes": list(self.notes)})

    def table_rows(self) -> list[dict]:
        rows = []
        for e, r in zip(self.epsilons, self.reports):
            row = {"epsilon": e, "rho_gap": r.rho_gap, "asymmetry": r.asymmetry}
            row.update({k: getattr(r, k) for k in DEFICIT_NAMES})
            rows.append(json_safe(row))
        return rows


def mode_family(k: int = 2, a0: float = 1.0) -> Callable[[float], BoundaryCurve]:
    return lambda eps: BoundaryCurve.mode(k, eps, a0)


def sweep_h_max(eps: float, c_mesh: float, h_cap: float) -> float:
    return min(h_cap, c_mesh * eps)


def stability_sweep(family: Callable[[float], BoundaryCurve], epsilons: Sequence[float],
                    c_mesh: float = 2.0, h_cap: float = 0.05, degree: int = 2,
                    family_id: str = "family", eps_cutoff: float | None = None,
                    noise_floor: float = 1e-6, min_r2: float = 0.98,
                    solver=None) -> SweepResult:
    """Deficit reports along ``family(ε)`` and log-log slopes of ρ_e−ρ_i per deficit."""
    if len(epsilons) < 4:
        raise ValueError("a sweep needs at least 4 epsilons")
    if not family(0.0).is_circle:
        raise ValueError("family(0) must be a circle")
    eps = tuple(sorted((float(e) for e in epsilons), reverse=True))
    if len(set(eps)) != len(eps) or eps[-1] <= 0:
        raise ValueError("epsilons must be distinct and positive")
    hs = tuple(sweep_h_max(e, c_mesh, h_cap) for e in eps)
    reports = tuple(deficit_report(family(e), h, degree, solver=solver) for e, h in zip(eps, hs))
    cutoff = math.inf if eps_cutoff is None else eps_cutoff
    notes = []
    fits = {}
    ratios = {}
    for name in DEFICIT_NAMES:
        xs, ys = [], []
        for e, r in zip(eps, reports):
            val = getattr(r, name)
            if val is None or not math.isfinite(val):
                continue
            if e > cutoff:
                continue
            if val <= noise_floor or r.rho_gap <= noise_floor:
                notes.append(f"{name}: eps={e} excluded (below noise floor)")
                continue
            xs.append(val)
            ys.append(r.rho_gap)
        tau = EXPECTED_EXPONENT[name]
        if len(xs) >= 2:
            s, c, r2 = loglog_fit(xs, ys)
            fits[name] = Fit(name, s, c, r2, len(xs), tau, bool(r2 >= min_r2 and s >= 0.9 * tau))
        ratios[name] = [r.rho_gap / getattr(r, name) ** tau
                        if getattr(r, name) is not None and getattr(r, name) > 0 else None
                        for r in reports]
    ratios["asymmetry_over_sbt_L2"] = [r.asymmetry / r.sbt_L2 if r.sbt_L2 > 0 else None
                                       for r in reports]
    return SweepResult(family_id, eps, hs, reports, fits, ratios, tuple(notes))


def ratio_spread(values: Sequence[float | None]) -> float:
    v = [x for x in values if x is not None and math.isfinite(x) and x > 0]
    if not v:
        return math.inf
    return max(v) / min(v)
