import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from steadyvortex.errors import InvalidKappa, InvalidSpec
from steadyvortex.profiles import (
    Profile,
    StrengthSchedule,
    check_hypotheses,
    check_schedule,
    load_table,
)

powers = st.floats(min_value=0.25, max_value=4.0)


def test_power_values():
    f = Profile.power(2)
    assert f(3.0) == 9.0
    assert f.inverse(9.0) == 3.0
    assert Profile.power(1).primitive(2.0) == 2.0


@pytest.mark.parametrize("p", [0.5, 1.0, 2.0, 3.5])
def test_vanish_on_negative_axis(p):
    f = Profile.power(p)
    assert f(-1.0) == 0.0
    assert f.inverse(-1.0) == 0.0
    assert f.primitive(-1.0) == 0.0


def test_invalid_power():
    with pytest.raises(InvalidSpec):
        Profile.power(0.0)


@given(powers, st.floats(min_value=0.0, max_value=5.0))
@settings(max_examples=200)
def test_inverse_round_trip(p, s):
    f = Profile.power(p)
    assert abs(f.inverse(f(s)) - s) <= 1e-10 * (1 + s)
    assert abs(f(f.inverse(s)) - s) <= 1e-10 * (1 + s)


@given(powers, st.floats(min_value=0.1, max_value=1.0))
@settings(max_examples=100)
def test_primitive_derivative(p, s):
    f = Profile.power(p)
    step = 1e-3
    num = (f.primitive(s + step) - f.primitive(s - step)) / (2 * step)
    # truncation step²/6 times the largest third derivative of F on the stencil
    a = 1 / p
    f3 = abs(a * (a - 1)) * max((s - step) ** (a - 2), (s + step) ** (a - 2))
    assert abs(num - f.inverse(s)) <= step**2 / 6 * f3 + 1e-12


@pytest.mark.parametrize("p", [0.5, 1.0])
def test_primitive_derivative_fixed_tolerance(p):
    f = Profile.power(p)
    s = np.linspace(0.1, 1.0, 91)
    num = (f.primitive(s + 1e-3) - f.primitive(s - 1e-3)) / 2e-3
    assert np.max(np.abs(num - f.inverse(s))) <= 1e-6


@given(powers, st.floats(min_value=0.0, max_value=2.0))
@settings(max_examples=50)
def test_primitive_matches_quadrature(p, s):
    f = Profile.power(p)
    ref, _ = quad(lambda r: float(f.inverse(r)), 0.0, s)
    assert abs(f.primitive(s) - ref) <= 1e-9 * (1 + abs(ref))


@given(powers)
@settings(max_examples=50)
def test_young_identity(p):
    # ∫₀ˢ f + ∫₀^{f(s)} f⁻¹ = s f(s), hence δ₀ + δ₁ = 1
    f = Profile.power(p)
    s = np.linspace(0.01, 1.0, 17)
    np.testing.assert_allclose(f.integral(s) + f.primitive(f(s)), s * f(s), rtol=1e-12)
    assert abs(f.delta0 + f.delta1 - 1.0) <= 1e-15


@pytest.mark.parametrize("p", [0.5, 1.0, 2.0])
def test_power_profiles_pass(p):
    rep = check_hypotheses(Profile.power(p))
    assert rep.passed, rep.failures()
    assert rep.constants["delta0"] == 1 / (p + 1)
    assert rep.constants["delta1"] == p / (p + 1)
    # the sampled worst ratio of (H3) equals δ₀ for a power law
    assert abs(rep["H3"].worst - 1 / (p + 1)) <= 1e-12


def test_p2_delta0_one_third():
    rep = check_hypotheses(Profile.power(2))
    assert rep.constants["delta0"] == pytest.approx(1 / 3, abs=0)


def test_table_with_offset_fails_h1():
    f = Profile.table([-1.0, 0.0, 1.0], [0.1, 0.1, 1.1])
    rep = check_hypotheses(f)
    assert not rep["H1"].passed
    assert "H1" in rep.failures()


def test_sine_table_fails_h2():
    s = np.linspace(0, np.pi, 401)
    f = Profile.table(s, np.maximum(np.sin(s), 0.0))
    rep = check_hypotheses(f, s_max=np.pi)
    assert not rep["H2"].passed
    assert rep["H1"].passed


def test_linear_table_matches_power_one():
    f = Profile.table([0.0, 1.0, 2.0], [0.0, 1.0, 2.0])
    g = Profile.power(1)
    s = np.linspace(-1, 3, 41)
    np.testing.assert_allclose(f(s), g(s), atol=1e-12)
    np.testing.assert_allclose(f.inverse(s), g.inverse(s), atol=1e-9)
    np.testing.assert_allclose(f.primitive(s), g.primitive(s), atol=1e-9)
    np.testing.assert_allclose(f.integral(s), g.integral(s), atol=1e-12)
    assert check_hypotheses(f).passed


def test_table_primitive_matches_quadrature():
    f = Profile.table([0.0, 0.3, 1.0, 1.5], [0.0, 0.05, 0.8, 2.0])
    for s in (0.02, 0.5, 0.9, 1.7, 3.0):
        ref, _ = quad(lambda r: float(f.inverse(r)), 0.0, s, limit=200)
        assert abs(f.primitive(s) - ref) <= 1e-9


def test_table_validation(tmp_path):
    with pytest.raises(InvalidSpec):
        Profile.table([0.0, 0.0], [0.0, 1.0])
    with pytest.raises(InvalidSpec):
        Profile.table([0.0], [0.0])
    path = tmp_path / "f.txt"
    path.write_text("0 0\n0.5 0.25\n1 1\n")
    f = load_table(path)
    assert f(0.75) == pytest.approx(0.625)
    bad = tmp_path / "g.txt"
    bad.write_text("0 0 1\n1 1 2\n")
    with pytest.raises(InvalidSpec):
        load_table(bad)


def test_check_hypotheses_arguments():
    with pytest.raises(ValueError):
        check_hypotheses(Profile.power(1), s_max=0.0)
    with pytest.raises(ValueError):
        check_hypotheses(Profile.power(1), n_samples=5)


# ------------------------------------------------------------ schedules


def test_schedule_values():
    assert StrengthSchedule.power(1.0, 0.5)(0.01) == pytest.approx(10.0, rel=1e-14)
    assert StrengthSchedule.constant(2.0)(0.3) == 2.0


@pytest.mark.parametrize("kappa", [0.0, -1.0])
def test_schedule_rejects_nonpositive_kappa(kappa):
    with pytest.raises(InvalidKappa):
        StrengthSchedule.constant()(kappa)


def test_constant_schedule_passes_proxies():
    rep = check_schedule(StrengthSchedule.constant(1.0), depth=20)
    assert rep.passed


def test_kappa_squared_fails_a1():
    # Λ(κ) = κ² written as a power schedule with β = -2
    rep = check_schedule(StrengthSchedule.power(1.0, -2.0), depth=20)
    assert not rep["A1"].passed


@given(st.floats(0.1, 10.0), st.floats(0.0, 0.95))
@settings(max_examples=50)
def test_power_schedule_proxies(a, beta):
    rep = check_schedule(StrengthSchedule.power(a, beta, gamma0=1.0), depth=20)
    assert rep["A1"].passed
    assert rep["A2"].passed == (beta < 1.0)


def test_schedule_rejects_bad_parameters():
    with pytest.raises(InvalidSpec):
        StrengthSchedule("exp", 1.0)
    with pytest.raises(InvalidSpec):
        StrengthSchedule.constant(0.0)
