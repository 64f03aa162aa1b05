import functools

import pytest
from hypothesis import HealthCheck, settings

from symlab.geometry import BoundaryCurve
from symlab.harmonic import build_harmonic
from symlab.mesh import triangulate
from symlab.torsion import solve_torsion

settings.register_profile("symlab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("symlab")


@functools.lru_cache(maxsize=None)
def solved(curve: BoundaryCurve, h_max: float, degree: int = 2):
    """Memoized (mesh, torsion field) pair shared across test modules."""
    mesh = triangulate(curve, h_max)
    return mesh, solve_torsion(mesh, degree)


@pytest.fixture(scope="session")
def disk():
    return solved(BoundaryCurve.circle(), 0.05)


@pytest.fixture(scope="session")
def disk_bundle(disk):
    mesh, u = disk
    return build_harmonic(mesh, u)


@pytest.fixture(scope="session")
def oval():
    """r = 1 + 0.1 cos 2θ at a moderate resolution."""
    return solved(BoundaryCurve.mode(2, 0.1), 0.04)


@pytest.fixture(scope="session")
def oval_bundle(oval):
    mesh, u = oval
    return build_harmonic(mesh, u)


# fixed corpus for the inequality and convexity checks
CORPUS = {
    "circle": BoundaryCurve.circle(),
    "cos2_0.1": BoundaryCurve.mode(2, 0.1),
    "cos3_0.08": BoundaryCurve.mode(3, 0.08),
    "cos5_0.3": BoundaryCurve.mode(5, 0.3),
    "cos2_0.15_cos3_0.1": BoundaryCurve(1.0, (0.0, 0.15, 0.1)),
    "cos2_0.05_at_1_2": BoundaryCurve.mode(2, 0.05, center=(1.0, 2.0)),
}

# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(k: int, passed: bool, detail: str) -> None:
    line = f"criterion {k}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[k] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
