import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phenowave.model import (ConfigError, InitialProfile, ModelParams, build_laws, derive_scaled_params,
                             growth_rate, register_law, rescaled_time_of_step, steps_to, sup_abs_growth,
                             validate_config)


def defaults(**kw):
    base = dict(tau=0.05**2 / 2, dx=0.05, dy=0.02, eps=1e-2, rho_max=1000.0)
    base.update(kw)
    return ModelParams(**base)


def test_scalings_at_default_step():
    theta, eta, beta, D_M = derive_scaled_params(0.05**2 / 2, 0.05, 0.02, 1e-2)
    assert theta == pytest.approx(1e-4, rel=1e-12)
    assert eta == pytest.approx(1e-2, rel=1e-12)
    assert beta == pytest.approx(6.25e-4, rel=1e-12)
    assert D_M == 1e-2


def test_theta_above_one_is_rejected():
    with pytest.raises(ConfigError, match="theta"):
        derive_scaled_params(1.0, 0.05, 0.5, 0.1)
    with pytest.raises(ConfigError, match="beta"):
        derive_scaled_params(1.0, 1.0, 0.02, 0.1)
    with pytest.raises(ConfigError, match="tau"):
        derive_scaled_params(0.0, 0.05, 0.02, 0.1)


@settings(max_examples=200, deadline=None)
@given(tau=st.floats(1e-6, 1.0), dx=st.floats(1e-3, 1.0), dy=st.floats(1e-3, 1.0), eps=st.floats(1e-4, 1.0))
def test_scalings_round_trip(tau, dx, dy, eps):
    p = ModelParams(tau=tau, dx=dx, dy=dy, eps=eps)
    assert p.theta * dx**2 / (2 * tau) == pytest.approx(eps**2, rel=1e-12)
    assert p.eta * dx**2 / (2 * p.E_max * tau) == pytest.approx(eps, rel=1e-12)
    assert p.beta * dy**2 / (2 * tau) == pytest.approx(eps**2, rel=1e-12)


def test_growth_rate_examples():
    p = defaults()
    laws = build_laws(p)
    assert growth_rate(0.0, p.rho_max, laws, p) == pytest.approx(0.0, abs=1e-15)
    assert growth_rate(1.0, 0.0, laws, p) == pytest.approx(0.0, abs=1e-15)
    assert growth_rate(0.5, p.rho_max / 2, laws, p) == pytest.approx(0.025, rel=1e-12)


@given(y=st.floats(0, 1), rho=st.floats(0, 5000), h=st.floats(1e-3, 100))
def test_growth_rate_affine_in_rho(y, rho, h):
    p = defaults()
    laws = build_laws(p)
    slope = (growth_rate(y, rho + h, laws, p) - growth_rate(y, rho, laws, p)) / h
    assert slope == pytest.approx(-p.alpha / p.rho_max, rel=1e-6)


def test_growth_rate_needs_rho_max():
    p = defaults(rho_max=None)
    with pytest.raises(ConfigError):
        growth_rate(0.0, 1.0, build_laws(p), p)


def test_defaults_validate_cleanly():
    p = defaults()
    assert validate_config(p, build_laws(p)) == []


def test_haptotaxis_bound_reported():
    # eta = 1.5 with mu(Y) = 1
    p = defaults(tau=0.0075, dx=0.1, eps=1.0, dy=1.0)
    report = validate_config(p, build_laws(p))
    assert any("haptotaxis" in v.constraint for v in report)


def test_proliferation_bound_reported():
    p = ModelParams(tau=20.0, dx=100.0, dy=100.0, eps=1e-3, X=100.0, Y=100.0, rho_max=1.0)
    report = validate_config(p, build_laws(p))
    assert any("proliferation" in v.constraint for v in report)


def test_nonpositive_inputs_short_circuit():
    p = defaults(alpha=-1.0)
    report = validate_config(p, build_laws(p))
    assert [v.constraint for v in report] == ["positive parameters"]


def test_lattice_must_fit_domain():
    p = defaults(X=1.03)
    assert any(v.constraint == "lattice fits domain" for v in validate_config(p, build_laws(p)))


def test_law_registry():
    register_law("mu", "cubic", lambda params: (lambda y: np.asarray(y, float) ** 3))
    p = defaults()
    laws = build_laws(p, mu="cubic")
    assert laws.mu(0.5) == pytest.approx(0.125)
    assert validate_config(p, laws) == []
    with pytest.raises(ConfigError):
        build_laws(p, r="nope")
    with pytest.raises(KeyError):
        register_law("q", "x", lambda params: None)


def test_bad_law_is_reported():
    register_law("r", "flat", lambda params: (lambda y: np.ones_like(np.asarray(y, float))))
    p = defaults()
    report = validate_config(p, build_laws(p, r="flat"))
    names = {v.constraint for v in report}
    assert "r(Y) = 0" in names and "r strictly decreasing" in names


def test_default_laws_grid_scan():
    p = defaults()
    laws = build_laws(p)
    y = p.y_grid()
    assert np.all(laws.mu(y) >= 0) and np.all(np.diff(laws.mu(y)) >= 0)
    assert laws.r(0.0) == 1.0 and laws.r(p.Y) == 0.0 and np.all(np.diff(laws.r(y)) <= 0)
    assert laws.p(0.0) == p.p_min and np.all(np.diff(laws.p(y)) >= 0)
    assert sup_abs_growth(p, laws) == pytest.approx(p.alpha)


def test_step_bookkeeping():
    assert rescaled_time_of_step(0, defaults()) == 0.0
    p = ModelParams(tau=1.25e-3, dx=0.05, dy=0.02, eps=1e-2)
    assert steps_to(30.0, p) == 2_400_000
    p3 = ModelParams(tau=1.25e-3, dx=0.05, dy=0.02, eps=1e-3)
    assert steps_to(15.0, p3) == 12_000_000
    assert steps_to(rescaled_time_of_step(17, p), p) == 17


@given(t=st.floats(0, 50), tau=st.floats(1e-4, 1e-1), eps=st.floats(1e-3, 1e-1))
def test_steps_to_reaches_target(t, tau, eps):
    p = ModelParams(tau=tau, dx=0.1, dy=0.1, eps=eps)
    k = steps_to(t, p)
    step = p.eps * p.tau
    # targets within 1e-9 of a step boundary snap to it
    assert rescaled_time_of_step(k, p) >= t - 1e-9 * max(step, t)
    assert k == 0 or rescaled_time_of_step(k - 1, p) < t


def test_initial_profile_normalisation():
    prof = InitialProfile()
    y = np.linspace(0, 1, 200_001)
    assert prof.C * np.trapezoid(np.exp(-(y - 0.2) ** 2 / 1e-2), y) == pytest.approx(1.0, rel=1e-10)
    # closed form of the same integral
    exact = math.sqrt(math.pi * 1e-2) / 2 * (math.erf(0.8 / 0.1) + math.erf(0.2 / 0.1))
    assert 1 / prof.C == pytest.approx(exact, rel=1e-9)


def test_initial_profile_density_peak():
    prof = InitialProfile(A0=100.0)
    assert prof.density(0.0, 0.2) == pytest.approx(100 * prof.C)
    assert prof.density(3.0, 0.2) < 1.0
