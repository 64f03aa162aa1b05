"""``symlab <command> --config <path> [--out <dir>] [--quiet]``.

Exit codes: 0 ok, 1 a check failed, 2 invalid config, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import analytic as an
from .config import COMMANDS, ConfigError, KeyLocator, RunConfig, load_config
from .fem import AssemblyError, SolverError
from .geometry import (N_DIM, BoundaryCurve, InvalidCurveError, StarShapednessError,
                       geometry_summary)
from .harmonic import PreconditionError, build_harmonic, oscillation_lemma_check
from .identities import run_checks
from .mesh import Mesh, MeshingError, triangulate
from .plots import line_plot
from .stability import (DEFICIT_NAMES, json_safe, deficit_report, explicit_bound_checks,
                        ratio_spread, stability_sweep)
from .torsion import (ConsistencyError, check_torsion, critical_point, field_from_dofs,
                      solve_torsion, torsional_rigidity)

NUMERICAL_ERRORS = (AssemblyError, SolverError, MeshingError, ConsistencyError,
                    PreconditionError, FloatingPointError, np.linalg.LinAlgError)


# ---------------------------------------------------------------------------
# solve cache
# ---------------------------------------------------------------------------

class SolveCache:
    """Mesh and torsion dofs on disk, keyed by a hash of (curve, h_max, degree)."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(curve: BoundaryCurve, h_max: float, degree: int) -> str:
        text = json.dumps({"curve": curve.to_dict(), "h_max": float(h_max), "degree": int(degree)},
                          sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:32]

    def __call__(self, curve: BoundaryCurve, h_max: float, degree: int):
        path = self.root / f"{self.key(curve, h_max, degree)}.npz"
        if path.exists():
            with np.load(path) as d:
                mesh = Mesh(vertices=d["vertices"], triangles=d["triangles"],
                            boundary_vertices=d["boundary_vertices"],
                            boundary_thetas=d["boundary_thetas"], curve=curve,
                            h_max=float(h_max))
                u = field_from_dofs(mesh, degree, d["u"], float(N_DIM))
            check_torsion(u)
            self.hits += 1
            return mesh, u
        mesh = triangulate(curve, h_max)
        u = solve_torsion(mesh, degree)
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp.npz")
        np.savez(tmp, vertices=mesh.vertices, triangles=mesh.triangles,
                 boundary_vertices=mesh.boundary_vertices,
                 boundary_thetas=mesh.boundary_thetas, u=u.dof_values)
        tmp.replace(path)
        self.misses += 1
        return mesh, u


# ---------------------------------------------------------------------------
# checks and output
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    note: str = ""

    def to_dict(self):
        return json_safe({"name": self.name, "value": self.value, "threshold": self.threshold,
                           "passed": self.passed, "note": self.note})


def _curve(cfg: RunConfig, text: str | None) -> BoundaryCurve:
    c = cfg.curve
    try:
        curve = BoundaryCurve(c.a0, c.cos, c.sin, c.center)
        curve.check_star_shaped()
    except (InvalidCurveError, StarShapednessError) as e:
        line = KeyLocator(text).line(("curve",)) if text else None
        raise ConfigError(f"invalid curve: {e}", line) from None
    return curve


def _check_h(cfg: RunConfig, a0: float, text: str | None, key=("h_max",)):
    if cfg.h_max > a0 / 4:
        line = KeyLocator(text).line(key) if text else None
        raise ConfigError(f"'h_max' must not exceed a0/4 = {a0 / 4}", line)


def _csv(rows: list[dict], header: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if r.get(h) is None else (repr(r[h]) if isinstance(r[h], float) else r[h])
                    for h in header])
    return buf.getvalue()


def _kv_rows(d: dict, prefix: str = "") -> list[dict]:
    rows = []
    for k, v in d.items():
        name = f"{prefix}{k}"
        if isinstance(v, dict):
            rows.extend(_kv_rows(v, name + "."))
        elif isinstance(v, (int, float, bool)) or v is None:
            rows.append({"quantity": name, "value": v})
    return rows


def cmd_solve(cfg, curve, cache):
    mesh, u = cache(curve, cfg.h_max, cfg.degree)
    geo = geometry_summary(curve)
    z = critical_point(u)
    tau = torsional_rigidity(u)
    res = {"geometry": geo.to_dict(), "n_vertices": mesh.n_vertices,
           "n_triangles": int(len(mesh.triangles)), "n_dofs": u.space.n_dofs,
           "min_u": float(u.dof_values.min()), "z": [float(z[0]), float(z[1])],
           "torsional_rigidity": {"volume_form": tau.volume_form, "energy_form": tau.energy_form,
                                  "relative_gap": tau.relative_gap},
           "flux": {"min": float(u.flux_dofs.min()), "max": float(u.flux_dofs.max()),
                    "integral": float(np.sum(u.flux_functional))}}
    checks = [Check("max_principle", float(u.dof_values.max()), 0.0,
                    bool(u.dof_values.max() <= 0 and u.dof_values.min() < 0)),
              Check("flux_positive", float(u.flux_dofs.min()), 0.0, bool(u.flux_dofs.min() > 0)),
              Check("rigidity_forms_agree", tau.relative_gap, cfg.h_max**2,
                    bool(tau.relative_gap <= cfg.h_max**2))]
    th = mesh.boundary_thetas
    extra = {"field.csv": u.vertex_csv()}
    plots = {"flux.svg": line_plot({"u_nu": (th, u.boundary_flux),
                                    "R": (th, np.full(len(th), geo.R))},
                                   "boundary flux", "theta", "u_nu")}
    summary = _csv(_kv_rows(res), ["quantity", "value"])
    return res, checks, summary, plots, extra


def cmd_identities(cfg, curve, cache):
    mesh, u = cache(curve, cfg.h_max, cfg.degree)
    geo = geometry_summary(curve)
    bundle = build_harmonic(mesh, u)
    rows = run_checks(u, bundle, geo, cfg.tolerances.residual_floor)
    tol = cfg.tolerances.identity
    checks = [Check(f"identity:{r.identity_id}", r.relative_residual, tol,
                    bool(not r.applicable or r.relative_residual <= tol), r.reason) for r in rows]
    res = {"geometry": geo.to_dict(), "n_vertices": mesh.n_vertices,
           "harmonic": bundle.summary(), "identities": [r.to_dict() for r in rows]}
    summary = _csv([json_safe(r.to_dict()) for r in rows],
                   ["id", "lhs", "rhs", "residual", "applicable"])
    ids = list(range(len(rows)))
    plots = {"identity_residuals.svg": line_plot(
        {"residual": (ids, [max(r.relative_residual, 1e-17) for r in rows])},
        "identity residuals (" + ", ".join(r.identity_id for r in rows) + ")",
        "identity index", "relative residual", logy=True)}
    return res, checks, summary, plots, {}


def cmd_report(cfg, curve, cache):
    rep = deficit_report(curve, cfg.h_max, cfg.degree, solver=cache)
    tol = cfg.tolerances
    bounds = explicit_bound_checks(rep, tol.slack, tol.abs_tol)
    mesh, u = cache(curve, cfg.h_max, cfg.degree)
    bundle = build_harmonic(mesh, u, np.array(rep.z))
    osc = oscillation_lemma_check(bundle, rep.geometry, cfg.p, torsion=u)
    checks = [Check(f"bound:{b.name}", b.lhs, b.rhs, b.passed) for b in bounds]
    checks += [Check(f"identity:{r.identity_id}", r.relative_residual, tol.identity,
                     bool(not r.applicable or r.relative_residual <= tol.identity), r.reason)
               for r in rep.identity_residuals]
    if rep.hk_deficit is not None:
        floor = -1e-3 * N_DIM * rep.geometry.area
        checks.append(Check("hk_nonnegative", rep.hk_deficit, floor, bool(rep.hk_deficit >= floor)))
        gap = abs(rep.hk_deficit - rep.obvp_deficit)
        checks.append(Check("hk_equals_obvp", gap, 1e-12, bool(gap <= 1e-12)))
    if osc.applicable:
        checks.append(Check("oscillation_lemma", osc.oscillation, osc.bound_printed,
                            osc.passed_printed,
                            "printed and derived constants disagree" if osc.disagree else ""))
    res = {"report": rep.to_dict(), "bounds": [b.to_dict() for b in bounds],
           "oscillation_lemma": json_safe(osc.__dict__), "harmonic": bundle.summary()}
    rows = _kv_rows({k: v for k, v in rep.to_dict().items() if k != "identity_residuals"})
    summary = _csv(rows, ["quantity", "value"])
    return res, checks, summary, {}, {}


def cmd_sweep(cfg, curve, cache):
    fam = cfg.family
    family = lambda e: BoundaryCurve.mode(fam.mode, e, fam.a0, fam.center)
    tol = cfg.tolerances
    sw = stability_sweep(family, cfg.epsilons, cfg.c_mesh, cfg.h_cap, cfg.degree,
                         family_id=f"r = {fam.a0} + eps cos({fam.mode} theta)",
                         noise_floor=tol.noise_floor, min_r2=tol.min_r2, solver=cache)
    checks = []
    for name, fit in sw.fitted_exponents.items():
        ok = fit.r2 >= tol.min_r2 and fit.slope >= tol.min_slope * fit.expected
        checks.append(Check(f"slope:{name}", fit.slope, tol.min_slope * fit.expected, bool(ok),
                            f"R2={fit.r2:.6f}"))
    spread = ratio_spread(sw.ratio_tables["asymmetry_over_sbt_L2"])
    checks.append(Check("asymmetry_ratio_spread", spread, tol.ratio_spread,
                        bool(spread <= tol.ratio_spread)))
    rows = sw.table_rows()
    header = ["epsilon", "rho_gap", "asymmetry", *DEFICIT_NAMES]
    plots = {}
    for name in DEFICIT_NAMES:
        xs = [r[name] for r in rows]
        plots[f"loglog_{name}.svg"] = line_plot({"rho_gap": (xs, [r["rho_gap"] for r in rows])},
                                                f"rho_e - rho_i vs {name}", name,
                                                "rho_e - rho_i", logx=True, logy=True)
    return sw.to_dict(), checks, _csv(rows, header), plots, {}


def cmd_analytic(cfg, curve, cache):
    a = cfg.analytic
    checks, res = [], {"gradient_constants": [], "capacity": [], "annulus": [], "cone": [],
                       "hardy": []}
    for N in a.dimensions:
        if N < 2:
            continue
        gp = an.gradient_bound_constant(N, variant="printed")
        gc = an.gradient_bound_constant(N, variant="corrected")
        res["gradient_constants"].append({"N": N, "claimed": gp.claimed, "sup_printed": gp.sup,
                                          "sup_corrected": gc.sup, "argsup": gc.argsup})
        checks.append(Check(f"sup_f:N={N}", gp.sup, gp.claimed, gp.matches_claim,
                            f"corrected formula gives {gc.sup:.6g}"))
        r, R = 1.0, 2.0
        sol = an.annulus_torsion(N, r, R)
        radii = np.geomspace(r * 1.001, R * 0.999, 100)
        ode = float(np.max(np.abs(sol.ode_residual(radii))))
        flux = an.annulus_inner_flux(N, r, R)
        fk = {v: float(R * (R - r) / r * an.f_kappa(N, r / R, v)) for v in ("printed", "corrected")}
        res["annulus"].append({"N": N, "ode_residual": ode, "bc": [float(sol.value(r)),
                                                                   float(sol.value(R))],
                               "inner_flux": flux, "f_formula_printed": fk["printed"],
                               "f_formula_corrected": fk["corrected"]})
        checks.append(Check(f"annulus_ode:N={N}", ode, 1e-10, ode <= 1e-10))
    for N in a.capacity_grid:
        for p in a.exponents:
            if not (1 < p < N):
                continue
            d = an.p_capacity_ball(N, p, 1.0)
            gap = abs(d["capacity"] - d["capacity_isoperimetric"]) / d["capacity"]
            cgap = abs(d["c"] - d["gradient_on_sphere"])
            ode = float(np.max(np.abs(d["potential"].ode_residual(np.geomspace(1.001, 100, 100)))))
            res["capacity"].append({"N": N, "p": p, "capacity": d["capacity"],
                                    "capacity_isoperimetric": d["capacity_isoperimetric"],
                                    "c": d["c"], "ode_residual": ode})
            checks.append(Check(f"capacity_triangle:N={N},p={p}", max(gap, cgap), 1e-12,
                                max(gap, cgap) <= 1e-12))
            checks.append(Check(f"capacity_ode:N={N},p={p}", ode, 1e-10, ode <= 1e-10))
    if 3 in a.capacity_grid:
        cap = an.p_capacity_ball(3, 2.0, 1.0)["capacity"]
        checks.append(Check("cap2_unit_ball_N3", abs(cap - 4 * math.pi), 1e-12,
                            abs(cap - 4 * math.pi) <= 1e-12))
    for m in a.cone_m:
        c = an.cone_checks(m, a.n_points, cfg.seed, a.search)
        res["cone"].append(json_safe(c.to_dict()))
        checks.append(Check(f"cone_H:m={m}", c.max_abs_curvature, 1e-8, c.curvature_ok))
        if m >= 4:
            checks.append(Check(f"cone_sign:m={m}", c.sign_agreement, c.sign_total,
                                c.all_signs_agree))
        elif m in (2, 3):
            checks.append(Check(f"cone_violation:m={m}", float(c.violation is not None), 1.0,
                                c.violation is not None))
    for n in a.hardy_n:
        if n < 3:
            continue
        h = an.hardy_and_windows(n, a=(n - 2) ** 2 / 4 + 1)
        res["hardy"].append(json_safe(h.to_dict()))
        checks.append(Check(f"hardy_inequality:n={n}", h.hardy_min_ratio, 1.0,
                            h.hardy_min_ratio >= 1.0))
        checks.append(Check(f"hardy_unbounded:n={n}", h.quotient_sequence[-1][1], -1e3,
                            h.reached_bound))
        checks.append(Check(f"window:n={n}", float(h.window_exists), float(3 <= n <= 7),
                            h.window_exists == (3 <= n <= 7)))
        checks.append(Check(f"stability_flag:n={n}", float(h.stability_flag), float(n >= 10),
                            h.stability_flag == (n >= 10)))
    res["seed"] = cfg.seed
    summary = _csv([c.to_dict() for c in checks], ["name", "value", "threshold", "passed"])
    ks = np.linspace(0.001, 0.999, 999)
    plots = {"f_kappa.svg": line_plot(
        {f"N={N}" + (" printed" if N == 2 else ""): (ks, an.f_kappa(N, ks)) for N in a.dimensions
         if N >= 2} | ({"N=2 corrected": (ks, an.f_kappa(2, ks, "corrected"))}
                      if 2 in a.dimensions else {}),
        "annulus flux profile f(kappa)", "kappa", "f")}
    return res, checks, summary, plots, {}


HANDLERS = {"solve": cmd_solve, "identities": cmd_identities, "report": cmd_report,
            "sweep": cmd_sweep, "analytic": cmd_analytic}


def _dump(obj) -> str:
    return json.dumps(json_safe(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def run(command: str, config_path: str, out: str = "out", quiet: bool = False,
        stdout=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    err = sys.stderr
    say = (lambda *a: None) if quiet else (lambda *a: print(*a, file=stdout))
    t0 = time.perf_counter()
    try:
        cfg = load_config(config_path, command)
        text = Path(config_path).read_text(encoding="utf-8")
        curve = None
        if command in ("solve", "identities", "report"):
            curve = _curve(cfg, text)
            _check_h(cfg, curve.a0, text)
        elif command == "sweep":
            if len(cfg.epsilons) < 4:
                raise ConfigError("'epsilons' needs at least 4 values",
                                  KeyLocator(text).line(("epsilons",)))
            if max(cfg.epsilons) >= cfg.family.a0:
                raise ConfigError("'epsilons' must stay below family.a0",
                                  KeyLocator(text).line(("epsilons",)))
            if cfg.h_cap > cfg.family.a0 / 4:
                raise ConfigError("'h_cap' must not exceed a0/4", KeyLocator(text).line(("h_cap",)))
    except ConfigError as e:
        where = f"{config_path}:{e.line}" if e.line else str(config_path)
        print(f"{where}: {e.message}", file=err)
        return 2
    outdir = Path(out)
    cache = SolveCache(outdir / "cache")
    try:
        with np.errstate(divide="ignore", invalid="ignore"):
            res, checks, summary, plots, extra = HANDLERS[command](cfg, curve, cache)
    except NUMERICAL_ERRORS as e:
        print(f"numerical failure in {type(e).__module__.split('.')[-1]}: "
              f"{type(e).__name__}: {e}", file=err)
        return 3
    passed = all(c.passed for c in checks)
    results = {"schema": "1", "command": command, "config": cfg.canonical(),
               "results": res, "checks": [c.to_dict() for c in checks], "passed": passed}
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "results.json").write_text(_dump(results), encoding="utf-8")
    (outdir / "summary.csv").write_text(summary, encoding="utf-8")
    for name, body in extra.items():
        (outdir / name).write_text(body, encoding="utf-8")
    if cfg.plots and plots:
        (outdir / "plots").mkdir(exist_ok=True)
        for name, svg in plots.items():
            (outdir / "plots" / name).write_text(svg, encoding="utf-8")
    manifest = {"config_hash": cfg.digest(), "tool": "symlab", "version": __version__,
                "command": command, "config_path": str(config_path),
                "wall_time_s": time.perf_counter() - t0,
                "cache": {"hits": cache.hits, "misses": cache.misses},
                "numpy": np.__version__, "python": sys.version.split()[0]}
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                          encoding="utf-8")
    say(f"{command}: {sum(c.passed for c in checks)}/{len(checks)} checks passed -> {outdir}")
    if not passed:
        fails = [c for c in checks if not c.passed]
        w = max(len(c.name) for c in fails)
        print(f"{'check':<{w}}  {'value':>14}  {'threshold':>14}  note", file=stdout)
        for c in fails:
            print(f"{c.name:<{w}}  {c.value:>14.6g}  {c.threshold:>14.6g}  {c.note}", file=stdout)
        return 1
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="symlab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default="out")
    ap.add_argument("--quiet", action="store_true")
    args = ap.parse_args(argv)
    return run(args.command, args.config, args.out, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
