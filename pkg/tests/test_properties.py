"""Hypothesis checks of the structural invariants."""

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings, strategies as st

from rdlab.grid import build_grid, constant_field, gradient_sq, integrate_nodes
from rdlab.harness import check_max_principle, run_comparison
from rdlab.models import (
    LVParams, autocatalysis, generalized_logistic, lotka_volterra, scalar_cubic, uncoupled_linear,
    uncoupled_logistic, zero_reaction,
)
from rdlab.reaction import (
    SamplePlan, check_cooperative, check_one_sided_lipschitz, check_positivity_compat, dominates,
    exp_shift, fd_jacobian, jacobian,
)
from rdlab.regularize import make_mollifier, mollifier_quadrature, mollify, regularize_pipeline, sup_deviation, truncate
from rdlab.solver import SolveConfig, check_norm_bound, integrate

FAST = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
SLOWER = settings(max_examples=8, deadline=None, suppress_health_check=[HealthCheck.too_slow])

ZOO = {
    "lv": lotka_volterra,
    "logistic3": uncoupled_logistic,
    "linear3": uncoupled_linear,
    "autocatalysis": lambda: autocatalysis(1.0, 0.5, 0.5),
    "genlogistic": lambda: generalized_logistic(2.0, 1.0),
}

rates = st.tuples(*[st.floats(0.2, 2.0)] * 3)
seeds = st.integers(0, 2**32 - 1)


# grid ------------------------------------------------------------------------

@FAST
@given(n=st.integers(3, 60), L=st.floats(0.3, 5.0), seed=seeds)
def test_discrete_integration_by_parts(n, L, seed):
    g = build_grid([L], [n], "dirichlet")
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=(2, n))
    h = g.spacing[0]
    lhs = -h * v @ (g.laplacian @ u)
    rhs = 0.25 * (gradient_sq(g, u + v) - gradient_sq(g, u - v))
    scale = gradient_sq(g, u) + gradient_sq(g, v)
    assert abs(lhs - rhs) <= 1e-10 * scale


@FAST
@given(n=st.integers(3, 80), L=st.floats(0.3, 5.0), k=st.integers(1, 3))
def test_sine_modes_are_discrete_eigenpairs(n, L, k):
    g = build_grid([L], [n], "dirichlet")
    h = g.spacing[0]
    e = np.sin(k * np.pi * g.nodes[0] / L)
    mu = 2.0 / h**2 * (1.0 - np.cos(k * np.pi * h / L))
    np.testing.assert_allclose(g.laplacian @ e, -mu * e, atol=1e-9 * mu)


@FAST
@given(lengths=st.lists(st.floats(0.1, 10.0), min_size=1, max_size=2), n=st.integers(3, 40),
       bc=st.sampled_from(["dirichlet", "neumann"]))
def test_weights_sum_to_measure(lengths, n, bc):
    g = build_grid(lengths, [n] * len(lengths), bc)
    assert integrate_nodes(g, np.ones(g.n_nodes)) == pytest.approx(np.prod(lengths), rel=1e-12)


# reaction ----------------------------------------------------------------------

@FAST
@given(name=st.sampled_from(sorted(ZOO) + ["cubic"]), seed=seeds)
def test_fd_jacobian_agrees_with_analytic(name, seed):
    s = scalar_cubic() if name == "cubic" else ZOO[name]()
    rng = np.random.default_rng(seed)
    U = rng.normal(size=(s.d, 40))
    U *= rng.uniform(0, 10, 40) / np.linalg.norm(U, axis=0)
    if s.positive_cone:
        U = np.abs(U)
        if s.d == 1:
            # fractional powers are smooth only away from 0
            U = np.maximum(U, 0.05)
    J, Jfd = jacobian(s, 0.0, U), fd_jacobian(s.f, 0.0, U)
    assert np.all(np.abs(Jfd - J) <= 1e-5 * np.maximum(1.0, np.abs(J)))


@SLOWER
@given(name=st.sampled_from(sorted(ZOO)), R0=st.floats(0.2, 5.0), seed=seeds)
def test_cooperative_subtests_agree(name, R0, seed):
    rep = check_cooperative(ZOO[name](), R0, plan=SamplePlan(seed=seed))
    if ZOO[name]().d > 1:
        assert rep.constants["pairwise"] == rep.constants["jacobian"]


@SLOWER
@given(seed=seeds, a=rates)
def test_lv_dominates_both_comparison_systems(seed, a):
    plan = SamplePlan(seed=seed, per_ball=2500)
    for other in (uncoupled_logistic, uncoupled_linear):
        rep = dominates(lotka_volterra(LVParams(a=a)), other(a=a), plan)
        assert rep.n_samples >= 10_000 and rep.witness.margin >= 0


@FAST
@given(beta=st.floats(-3.0, 3.0), t=st.floats(0.0, 5.0), seed=seeds)
def test_exp_shift_round_trip(beta, t, seed):
    sh = exp_shift(lotka_volterra(), beta)
    u = np.random.default_rng(seed).uniform(0, 10, (3, 5))
    np.testing.assert_allclose(sh.to_u(t, sh.to_v(t, u)), u, rtol=1e-12)


@SLOWER
@given(name=st.sampled_from(sorted(ZOO)), seed=seeds)
def test_zoo_positivity_compat_margin_zero(name, seed):
    rep = check_positivity_compat(ZOO[name](), SamplePlan(seed=seed))
    assert rep.ok and rep.witness.margin == 0.0


@FAST
@given(name=st.sampled_from(sorted(ZOO)), seed=seeds)
def test_lv_never_cooperative(name, seed):
    a = check_cooperative(lotka_volterra(), 1.0, plan=SamplePlan(seed=seed))
    b = check_cooperative(lotka_volterra(), 1.0, plan=SamplePlan(seed=seed))
    assert not a.ok and a.witness == b.witness


# regularize --------------------------------------------------------------------

@FAST
@given(name=st.sampled_from(sorted(ZOO) + ["cubic"]), k=st.floats(1.0, 20.0), seed=seeds)
def test_truncation_exact_on_plateau(name, k, seed):
    s = scalar_cubic() if name == "cubic" else ZOO[name]()
    rng = np.random.default_rng(seed)
    U = rng.normal(size=(s.d, 64))
    U *= rng.uniform(0, k, 64) / np.linalg.norm(U, axis=0)
    if s.positive_cone:
        U = np.abs(U)
    np.testing.assert_array_equal(truncate(s, k).f(0.0, U), s.f(0.0, U))


@SLOWER
@given(k=st.floats(2.0, 8.0), eps=st.floats(0.01, 0.2), seed=seeds)
def test_domination_survives_stages(k, eps, seed):
    lv, lg = lotka_volterra(), uncoupled_logistic()
    b1 = truncate(lv, k, "mixed", q=lg.exponents)
    b2 = truncate(lg, k, "affine")
    rng = np.random.default_rng(seed)
    U = rng.uniform(0, k + 2, (3, 400))
    d = b1.f(0.0, U) - b2.f(0.0, U)
    assert np.all(d >= -1e-12 * (1 + np.abs(b1.f(0.0, U))))
    moll = make_mollifier(eps, 3)
    m1, m2 = mollify(b1, moll, 6), mollify(b2, moll, 6)
    # the bump must stay inside the cone where f1 >= f2 holds
    V = eps + rng.uniform(0, k, (3, 200))
    d = m1.f(0.0, V) - m2.f(0.0, V)
    assert np.all(d >= -1e-10 * (1 + np.abs(m1.f(0.0, V))))


@FAST
@given(u0=st.floats(1.2, 3.6))
def test_mollified_system_is_smooth(u0):
    moll = make_mollifier(0.25, 1)
    s = mollify(truncate(scalar_cubic(), 2.0), moll)
    steps = [2e-3, 1e-3, 5e-4]
    h_max = steps[0] * max(1.0, u0)
    # the truncated cubic is only C2 at |u| = 2 and 3; keep every quadrature shift off those joins
    nodes, _ = mollifier_quadrature(moll)
    kinks = np.concatenate([2.0 + nodes[0], 3.0 + nodes[0]])
    assume(np.min(np.abs(kinks - u0)) > 2 * h_max)
    u = np.array([[u0]])
    J = [fd_jacobian(s.f, 0.0, u, eps=h)[0, 0, 0] for h in steps]
    e1, e2 = abs(J[0] - J[1]), abs(J[1] - J[2])
    if e2 > 1e-9:
        assert np.log2(e1 / e2) >= 1.9


@pytest.mark.parametrize("name", sorted(ZOO) + ["cubic"])
def test_sup_deviation_within_one_over_k(name):
    s = scalar_cubic() if name == "cubic" else ZOO[name]()
    pipe = regularize_pipeline(s, 5.0)
    assert sup_deviation(s, pipe.system, 3.0) <= 1.0 / 5.0 + 1e-6


# solver / harness ------------------------------------------------------------

pair_names = st.sampled_from(["lv-logistic", "lv-linear", "logistic-self", "genlogistic-self"])


def _pair(name):
    return {
        "lv-logistic": (lotka_volterra(), uncoupled_logistic()),
        "lv-linear": (lotka_volterra(), uncoupled_linear()),
        "logistic-self": (uncoupled_logistic(), uncoupled_logistic()),
        "genlogistic-self": (generalized_logistic(2.0, 1.0), generalized_logistic(2.0, 1.0)),
    }[name]


def _ordered_data(g, d, seed, bc):
    rng = np.random.default_rng(seed)
    x = g.nodes[0]
    base = np.cos(np.pi * x) if bc == "neumann" else np.sin(np.pi * x)
    lo = rng.uniform(0.05, 0.4, (d, 1)) * (1 + 0.5 * base)[None]
    hi = lo + rng.uniform(0.0, 0.3, (d, 1)) * (1 + 0.5 * base)[None]
    return np.abs(lo), np.abs(hi)


@SLOWER
@given(name=pair_names, bc=st.sampled_from(["dirichlet", "neumann"]), seed=seeds)
def test_scheme_preserves_order_and_positivity(name, bc, seed):
    s1, s2 = _pair(name)
    g = build_grid([1.0], [30], bc)
    u1, u2 = _ordered_data(g, s1.d, seed, bc)
    C3 = check_one_sided_lipschitz(s2).constants["C3"]
    dt = min(1e-2, 1.0 / (4 * C3)) if C3 > 0 else 1e-2
    rep = run_comparison(s1, s2, u1, u2, g, SolveConfig(T=0.3, dt=dt, record_stride=5))
    assert rep.ok
    assert rep.min_value >= -1e-8


@SLOWER
@given(name=pair_names, seed=seeds)
def test_halving_dt_does_not_increase_violation(name, seed):
    s1, s2 = _pair(name)
    g = build_grid([1.0], [20], "neumann")
    u1, u2 = _ordered_data(g, s1.d, seed, "neumann")
    v = [run_comparison(s1, s2, u1, u2, g, SolveConfig(T=0.2, dt=dt), certify=False).max_violation
         for dt in (2e-2, 1e-2)]
    assert v[1] <= v[0] + 1e-15


@FAST
@given(seed=seeds, bc=st.sampled_from(["dirichlet", "neumann"]), D=st.floats(0.1, 3.0))
def test_pure_diffusion_norm_non_increasing(seed, bc, D):
    g = build_grid([1.0], [25], bc)
    u0 = np.random.default_rng(seed).normal(size=(1, 25))
    tr = integrate(g, zero_reaction(D=D), u0, SolveConfig(T=0.05, dt=5e-3))
    assert np.all(np.diff(tr.l2_sq) <= 1e-14 * tr.l2_sq[0])


@SLOWER
@given(name=st.sampled_from(["lv", "logistic3", "autocatalysis", "genlogistic"]), seed=seeds)
def test_norm_bound_surrogate(name, seed):
    s = ZOO[name]()
    g = build_grid([1.0], [30], "neumann")
    u0, _ = _ordered_data(g, s.d, seed, "neumann")
    tr = integrate(g, s, 3 * u0, SolveConfig(T=0.3, dt=1e-3, record_stride=30))
    assert check_norm_bound(tr, s.C2, min(s.diffusion)).ok


@SLOWER
@given(a=rates, seed=seeds)
def test_aggregate_bound_implied_by_components(a, seed):
    g = build_grid([1.0], [20], "dirichlet")
    u0, _ = _ordered_data(g, 3, seed, "dirichlet")
    tr = integrate(g, lotka_volterra(LVParams(a=a)), u0, SolveConfig(T=0.3, dt=1e-2))
    rep = check_max_principle(tr, a, u0)
    if rep.constants["upper_slack"] >= 0:
        assert rep.constants["aggregate_slack"] >= 0


def test_cn_refinement_reduces_error_threefold():
    errs = []
    for n, dt in ((20, 4e-3), (41, 2e-3), (83, 1e-3)):
        g = build_grid([1.0], [n], "dirichlet")
        x = g.nodes[0]
        tr = integrate(g, zero_reaction(), np.sin(np.pi * x)[None], SolveConfig(T=0.1, dt=dt, scheme="cn"))
        errs.append(np.max(np.abs(tr.final[0] - np.exp(-np.pi**2 * 0.1) * np.sin(np.pi * x))))
    assert errs[0] / errs[1] >= 3 and errs[1] / errs[2] >= 3
