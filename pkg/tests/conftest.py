import numpy as np
import pytest
from hypothesis import settings

from steadyvortex import (
    DomainSpec,
    Profile,
    ProblemSpec,
    ScalarField,
    StrengthSchedule,
    build_domain,
    harmonic_from_flux,
    maximize,
)

settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")

# criterion id -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}  {detail}")


def analytic_q(d, fn):
    x, y = d.nodes.T
    bp = d.boundary.points
    return ScalarField(d, fn(x, y), fn(bp[:, 0], bp[:, 1]), fn)


def flux_x1(d):
    """``q = x1`` on the unit disk from boundary flux ``g = -sin θ``."""
    return harmonic_from_flux(d, -np.sin(d.boundary.s))


def disk_problem(h, kappa=0.05, q=None):
    d = build_domain(DomainSpec.disk(), h)
    q = flux_x1(d) if q is None else q
    return ProblemSpec(d, q, Profile.power(1.0), StrengthSchedule.constant(1.0), kappa)


@pytest.fixture(scope="session")
def disk64():
    return build_domain(DomainSpec.disk(), 1 / 64)


@pytest.fixture(scope="session")
def a3_problem():
    return disk_problem(1 / 64)


@pytest.fixture(scope="session")
def a3_solution(a3_problem):
    return maximize(a3_problem)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
