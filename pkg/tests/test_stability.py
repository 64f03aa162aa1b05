import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import solved
from symlab.geometry import BoundaryCurve
from symlab.stability import (DEFICIT_NAMES, deficit_report, explicit_bound_checks, json_safe,
                              loglog_fit, mode_family, ratio_spread, stability_sweep, sweep_h_max)


def _report(curve, h=0.05):
    return deficit_report(curve, h, solver=solved)


@pytest.fixture(scope="module")
def disk_report():
    return _report(BoundaryCurve.circle())


def test_disk_deficits_vanish(disk_report):
    r = disk_report
    assert r.rho_gap < 1e-8
    assert r.serrin_L2 < 2e-3 and r.sbt_L2 < 1e-12 and r.sbt_plus < 1e-12
    assert abs(r.hk_deficit) < 1e-3
    assert r.asymmetry < 1e-6
    assert r.convex
    assert all(c.passed for c in explicit_bound_checks(r))


def test_translated_circle():
    base = _report(BoundaryCurve.circle(0.7), 0.05)
    moved = _report(BoundaryCurve.circle(0.7, (3.0, -1.0)), 0.05)
    assert moved.z == pytest.approx((base.z[0] + 3.0, base.z[1] - 1.0), abs=1e-8)
    for k in ("rho_gap", "serrin_L2", "sbt_L2", "hk_deficit", "asymmetry"):
        assert getattr(moved, k) == pytest.approx(getattr(base, k), abs=1e-10)


@pytest.mark.parametrize("k", [2, 3])
def test_first_order_perturbation(k):
    # r = 1 + ε cos kθ: u_ν − R ≈ (1−k)ε cos kθ and H − H0 ≈ (k²−1)ε cos kθ
    eps = 0.02
    r = _report(BoundaryCurve.mode(k, eps), 0.04)
    sq = math.sqrt(math.pi)
    assert r.rho_gap == pytest.approx(2 * eps, rel=1e-3)
    assert r.serrin_L2 == pytest.approx(abs(1 - k) * eps * sq, rel=3e-2)
    assert r.sbt_L2 == pytest.approx((k * k - 1) * eps * sq, rel=3e-2)
    assert r.sbt_plus == pytest.approx(2 * (k * k - 1) * eps, rel=3e-2)
    assert r.asymmetry == pytest.approx(4 * eps / math.pi, rel=3e-2)


def test_cauchy_schwarz_between_norms():
    r = _report(BoundaryCurve(1.0, (0.1, 0.05), (0.04,)))
    root = math.sqrt(r.boundary_length)
    assert r.serrin_L1 <= root * r.serrin_L2 * (1 + 1e-12)
    assert r.sbt_plus <= root * r.sbt_L2 * (1 + 1e-12)


def test_hk_and_obvp_coincide():
    r = _report(BoundaryCurve.mode(2, 0.1))
    assert r.hk_deficit > 0
    assert r.obvp_deficit == pytest.approx(r.hk_deficit, rel=1e-10)


def test_nonconvex_report():
    r = _report(BoundaryCurve.mode(5, 0.3))
    assert not r.convex
    assert r.hk_deficit is None and math.isnan(r.obvp_deficit)
    d = r.to_dict()
    assert d["hk_deficit"] is None and d["obvp_deficit"] is None
    json.dumps(d, allow_nan=False)
    assert all(c.passed for c in explicit_bound_checks(r)), explicit_bound_checks(r)


def test_scale_covariance():
    eps, lam = 0.05, 2.0
    a = _report(BoundaryCurve.mode(2, eps), 0.05)
    b = _report(BoundaryCurve.mode(2, eps).scaled(lam), 0.05 * lam)
    assert b.rho_gap == pytest.approx(lam * a.rho_gap, rel=1e-8)
    assert b.serrin_L2 == pytest.approx(lam**1.5 * a.serrin_L2, rel=1e-8)
    assert b.sbt_L2 == pytest.approx(lam**-0.5 * a.sbt_L2, rel=1e-8)
    assert b.asymmetry == pytest.approx(a.asymmetry, abs=1e-8)


@pytest.mark.parametrize("curve", [BoundaryCurve.mode(3, 0.1),
                                   BoundaryCurve(1.0, (0.15, 0.1), ()),
                                   BoundaryCurve.mode(2, 0.05, center=(1.0, 2.0))])
def test_explicit_bounds(curve):
    checks = explicit_bound_checks(_report(curve))
    assert len(checks) == 7
    for c in checks:
        assert c.passed, c
        assert set(c.to_dict()) == {"name", "lhs", "rhs", "margin", "passed"}


def test_bound_check_tolerance():
    r = _report(BoundaryCurve.mode(2, 0.05))
    strict = {c.name: c for c in explicit_bound_checks(r, slack=0.0, abs_tol=0.0)}
    # lower bound on the flux holds with a real margin
    assert strict["gradient_lower"].margin > 0


@given(st.floats(0.2, 3.0), st.floats(-3, 3), st.lists(st.floats(1e-4, 1e2), min_size=3,
                                                        max_size=8, unique=True))
def test_loglog_fit_recovers_power_law(s, c, x):
    x = np.array(x)
    if np.ptp(np.log(x)) < 1e-3:
        return
    y = math.exp(c) * x**s
    slope, icpt, r2 = loglog_fit(x, y)
    assert slope == pytest.approx(s, rel=1e-8)
    assert icpt == pytest.approx(c, abs=1e-7)
    assert r2 == pytest.approx(1.0, abs=1e-10)


def test_small_sweep():
    res = stability_sweep(mode_family(2), [0.02, 0.04, 0.01, 0.08], h_cap=0.05,
                          family_id="cos2", solver=solved)
    assert res.epsilons == (0.08, 0.04, 0.02, 0.01)
    assert res.h_values == (0.05, 0.05, 0.04, 0.02)
    for name in ("serrin_L2", "sbt_L2"):
        f = res.fitted_exponents[name]
        assert f.accepted and f.slope == pytest.approx(1.0, abs=0.1), f
    assert ratio_spread(res.ratio_tables["asymmetry_over_sbt_L2"]) < 2.0
    assert len(res.table_rows()) == 4
    assert set(DEFICIT_NAMES) <= set(res.table_rows()[0])
    json.dumps(res.to_dict(), allow_nan=False)


def test_sweep_rejects_bad_input():
    with pytest.raises(ValueError):
        stability_sweep(mode_family(2), [0.1, 0.05, 0.02])
    with pytest.raises(ValueError):
        stability_sweep(lambda e: BoundaryCurve.mode(2, 0.1 + e), [0.1, 0.05, 0.02, 0.01])
    with pytest.raises(ValueError):
        stability_sweep(mode_family(2), [0.1, 0.05, 0.05, 0.01])


def test_helpers():
    assert sweep_h_max(0.01, 2.0, 0.05) == pytest.approx(0.02)
    assert sweep_h_max(0.1, 2.0, 0.05) == 0.05
    assert ratio_spread([1.0, None, 2.0, float("nan")]) == 2.0
    assert math.isinf(ratio_spread([None]))
    assert json_safe({"a": (np.float64(np.inf), np.int64(3), np.bool_(True))}) == \
        {"a": [None, 3, True]}
