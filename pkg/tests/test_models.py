import numpy as np
import pytest

from rdlab.models import (
    LVParams, MODEL_NAMES, autocatalysis, build_model, generalized_logistic, lotka_volterra,
    scalar_cubic, uncoupled_linear, uncoupled_logistic,
)
from rdlab.reaction import fd_jacobian, jacobian


def test_lv_values_by_hand():
    u = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(lotka_volterra().f(0.0, u), [5.0, 10.0, 15.0])
    np.testing.assert_allclose(uncoupled_logistic().f(0.0, u), [0.0, 2.0, 6.0])
    np.testing.assert_allclose(uncoupled_linear().f(0.0, u), [-1.0, -2.0, -3.0])


def test_lv_dominates_comparison_systems_exactly_on_cone():
    U = np.abs(np.random.default_rng(1).normal(size=(3, 500))) * 5
    lv, lg, ln = (m().f(0.0, U) for m in (lotka_volterra, uncoupled_logistic, uncoupled_linear))
    assert np.all(lv >= lg) and np.all(lg >= ln)


def test_lv_declared_dissipation_holds():
    s = lotka_volterra(LVParams(a=(1.0, 2.0, 3.0)))
    U = np.abs(np.random.default_rng(2).normal(size=(3, 4000))) * 4
    lhs = np.sum(s.f(0.0, U) * U, axis=0)
    rhs = s.alpha * np.sum(U**3, axis=0) - s.C2
    assert np.all(lhs >= rhs)
    assert s.C2 == pytest.approx(16 / 27 * 36)


def test_time_dependent_lv_is_nonautonomous():
    s = lotka_volterra(LVParams(a=lambda t: (1.0 + t, 1.0, 1.0)))
    assert not s.autonomous and s.alpha is None
    np.testing.assert_allclose(s.f(1.0, np.array([1.0, 0.0, 0.0])), [-1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        LVParams(a=lambda t: (1.0, 1.0, 1.0)).a_max


def test_lv_rejects_nonpositive_coefficients():
    with pytest.raises(ValueError):
        lotka_volterra(LVParams(a=(1.0, 0.0, 1.0)).validate())
    with pytest.raises(ValueError):
        uncoupled_logistic(a=(1.0, -1.0, 1.0))


@pytest.mark.parametrize("make", [
    lotka_volterra, uncoupled_logistic, uncoupled_linear,
    lambda: autocatalysis(1.0, 0.5, 0.5), lambda: generalized_logistic(2.0, 1.0), scalar_cubic,
])
def test_analytic_jacobians(make):
    s = make()
    U = np.abs(np.random.default_rng(4).normal(size=(s.d, 50))) * 2 + 0.05
    np.testing.assert_allclose(jacobian(s, 0.0, U), fd_jacobian(s.f, 0.0, U), rtol=1e-6, atol=1e-7)


def test_genlogistic_constant_is_sharp():
    q, r = 2.0, 1.0
    s = generalized_logistic(q, r)
    u = np.linspace(0, 3, 300001)
    # (f, u) = u^p - u^(r+1); min of (f, u) - alpha u^p equals -C2
    gap = s.f(0.0, u[None])[0] * u - s.alpha * u ** s.exponents[0]
    assert gap.min() == pytest.approx(-s.C2, rel=1e-8)


def test_autocatalysis_constant_bounds_product():
    s = autocatalysis(1.0, 0.5, 0.5)
    u = np.linspace(0, 10, 100001)
    gap = s.f(0.0, u[None])[0] * u - s.alpha * u ** s.exponents[0]
    assert gap.min() >= -s.C2
    assert s.exponents == (2.5,)


def test_logistic_special_case_is_classic():
    u = np.linspace(-1, 3, 9)
    np.testing.assert_allclose(generalized_logistic(1.0, 1.0).f(0.0, u[None])[0],
                               np.maximum(u, 0) * (np.maximum(u, 0) - 1))


def test_fractional_powers_finite_below_zero():
    s = autocatalysis()
    u = np.array([[-1e-12, -1.0, 0.0]])
    assert np.all(np.isfinite(s.f(0.0, u))) and np.all(np.isfinite(jacobian(s, 0.0, u)))


def test_cubic_constants():
    s = scalar_cubic()
    u = np.linspace(-5, 5, 10001)
    assert np.all(s.f(0.0, u[None])[0] * u >= 0.5 * u**4 - 0.5 - 1e-12)


@pytest.mark.parametrize("name", MODEL_NAMES)
def test_build_model_defaults(name):
    s = build_model(name, {})
    assert s.d in (1, 3)


def test_build_model_params_and_errors():
    s = build_model("lv", {"a": [1.0, 2.0, 3.0], "A": [1, 2, 3, 4, 5, 6]})
    A = s.meta["params"].interactions(0.0)
    assert A[0, 1] == 1 and A[2, 1] == 6
    assert build_model("genlogistic", {"q": 2, "r": 1}).exponents == (4.0,)
    with pytest.raises(ValueError):
        build_model("lv", {"bogus": 1})
    with pytest.raises(ValueError):
        build_model("nope", {})
    with pytest.raises(ValueError):
        build_model("lv", {"A": [1, 2]})
    with pytest.raises(ValueError):
        autocatalysis(m=1.5)
    with pytest.raises(ValueError):
        generalized_logistic(q=-1.0)
