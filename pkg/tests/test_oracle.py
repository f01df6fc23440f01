import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from steadyvortex.domain import DomainSpec, build_domain
from steadyvortex.elliptic import ScalarField, green_apply
from steadyvortex.errors import GridTooLarge
from steadyvortex.oracle import dense_green, oracle_maximize, project_capped
from steadyvortex.profiles import Profile, StrengthSchedule
from steadyvortex.variational import ProblemSpec, energy, maximize


def six_by_six(kappa_frac=0.1, p=1.0, lam=1.0):
    d = build_domain(DomainSpec.rectangle(), 1 / 7)
    q = ScalarField(d, d.nodes[:, 0].copy(), d.boundary.points[:, 0].copy())
    sched = StrengthSchedule.constant(lam)
    return ProblemSpec(d, q, Profile.power(p), sched, kappa_frac * lam * d.discrete_area)


def tau_by_bisection(y, total, cap):
    lo, hi = y.min() - cap - 1, y.max() + 1
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.clip(y - mid, 0, cap).sum() > total:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@given(arrays(float, st.integers(1, 40), elements=st.floats(-5, 5)), st.floats(0.0, 1.0),
       st.floats(0.1, 3.0))
@settings(max_examples=200)
def test_projection_properties(y, frac, cap):
    total = frac * cap * len(y)
    x = project_capped(y, total, cap)
    assert np.all(x >= 0) and np.all(x <= cap)
    assert abs(x.sum() - total) <= 1e-9 * (1 + total)
    # x = clip(y - τ) for the τ that a plain bisection finds
    tau = tau_by_bisection(y, total, cap)
    np.testing.assert_allclose(x, np.clip(y - tau, 0, cap), atol=1e-8)


@given(arrays(float, 12, elements=st.floats(-2, 2)), arrays(float, 12, elements=st.floats(0, 1)))
@settings(max_examples=100)
def test_projection_is_nearest(y, z):
    # any other feasible point is at least as far from y
    cap, total = 1.0, 4.0
    x = project_capped(y, total, cap)
    z = project_capped(z * 3, total, cap)
    assert np.sum((x - y) ** 2) <= np.sum((z - y) ** 2) + 1e-12


def test_dense_green_matches_fd():
    d = build_domain(DomainSpec.disk(), 0.2)
    w = np.random.default_rng(0).random(d.n)
    np.testing.assert_allclose(dense_green(d) @ w, green_apply(d, w), rtol=1e-12)


def test_grid_too_large():
    d = build_domain(DomainSpec.rectangle(), 1 / 12)
    q = ScalarField(d, np.zeros(d.n))
    p = ProblemSpec(d, q, Profile.power(1), StrengthSchedule.constant(1), 0.1)
    with pytest.raises(GridTooLarge):
        oracle_maximize(p)


def test_saturated_class_is_singleton():
    p = six_by_six(kappa_frac=1.0, lam=2.0)
    o = oracle_maximize(p, restarts=2, steps=50)
    s = maximize(p)
    np.testing.assert_allclose(o.omega, 2.0)
    np.testing.assert_allclose(s.omega, 2.0)


def test_zero_start_projects_to_mass():
    x = project_capped(np.zeros(36), 0.3 * 36, 1.0)
    assert abs(x.sum() - 0.3 * 36) <= 1e-12
    np.testing.assert_allclose(x, 0.3)


@pytest.mark.parametrize("p_exp,frac", [(1.0, 0.1), (2.0, 0.2), (0.5, 0.05)])
def test_oracle_agrees_with_solver(p_exp, frac):
    p = six_by_six(kappa_frac=frac, p=p_exp)
    o = oracle_maximize(p)
    s = maximize(p)
    assert s.energy >= o.energy - 1e-8
    assert len(o.restart_energies) == 10
    e_o = energy(p.domain, o.omega, p.q, p.lam, p.profile)
    assert e_o == pytest.approx(o.energy, abs=1e-14)


def test_oracle_deterministic():
    p = six_by_six()
    a = oracle_maximize(p, restarts=3, steps=2000, seed=7)
    b = oracle_maximize(p, restarts=3, steps=2000, seed=7)
    assert a.omega.tobytes() == b.omega.tobytes()
    assert a.restart_energies == b.restart_energies
