import numpy as np
import pytest

from rdlab.errors import BlowUpError, GridError
from rdlab.grid import build_grid, constant_field, integrate_nodes, sine_field
from rdlab.models import generalized_logistic, lotka_volterra, scalar_polynomial, zero_reaction
from rdlab.solver import (
    BACKWARD_EULER, CRANK_NICOLSON, SolveConfig, check_energy_inequality, check_norm_bound,
    energy_constant, integrate, normalize_scheme, positive_part_norm, step, tol_disc,
)


def _lam_h(n, L=1.0):
    h = L / (n + 1)
    return (2.0 - 2.0 * np.cos(np.pi * h / L)) / h**2


def test_scheme_aliases():
    assert normalize_scheme("CN") == CRANK_NICOLSON
    assert normalize_scheme("backward-euler") == BACKWARD_EULER
    with pytest.raises(ValueError):
        normalize_scheme("rk4")


@pytest.mark.parametrize("kw", [dict(dt=0.0), dict(T=0.0), dict(dt=2.0), dict(record_stride=0)])
def test_solve_config_rejects(kw):
    with pytest.raises(ValueError):
        SolveConfig(**kw)


def test_last_step_lands_on_T():
    sc = SolveConfig(T=1.0, dt=0.3)
    assert sc.n_steps == 3 and sc.step_size == pytest.approx(1 / 3)
    g = build_grid([1.0], [10], "neumann")
    tr = integrate(g, zero_reaction(), constant_field(g, [1.0]), sc)
    assert tr.times[-1] == 1.0 and len(tr.times) == 4


@pytest.mark.parametrize("scheme", [BACKWARD_EULER, CRANK_NICOLSON])
def test_heat_sine_mode_matches_discrete_amplification(scheme):
    n, dt, steps = 40, 1e-3, 50
    g = build_grid([1.0], [n], "dirichlet")
    u0 = sine_field(g, [1.0])
    tr = integrate(g, zero_reaction(), u0, SolveConfig(T=steps * dt, dt=dt, scheme=scheme))
    z = dt * _lam_h(n)
    amp = 1 / (1 + z) if scheme == BACKWARD_EULER else (1 - z / 2) / (1 + z / 2)
    np.testing.assert_allclose(tr.final, amp**steps * u0, rtol=1e-10, atol=1e-14)


def test_adi_2d_product_mode_factor():
    n, dt, steps = 20, 2e-3, 10
    g = build_grid([1.0, 1.0], [n, n], "dirichlet")
    u0 = sine_field(g, [1.0])
    tr = integrate(g, zero_reaction(), u0, SolveConfig(T=steps * dt, dt=dt))
    lam = _lam_h(n)
    factor = 1 - dt * 2 * lam / (1 + dt * lam) ** 2
    np.testing.assert_allclose(tr.final, factor**steps * u0, rtol=1e-10, atol=1e-14)


def test_neumann_heat_conserves_mass():
    g = build_grid([2.0], [50], "neumann")
    u0 = np.cos(np.pi * g.nodes / 2.0) + 1.0
    tr = integrate(g, zero_reaction(D=0.7), u0, SolveConfig(T=0.5, dt=1e-2, record_stride=10))
    mass = integrate_nodes(g, tr.frames[:, 0, :])
    np.testing.assert_allclose(mass, mass[0], rtol=1e-12)


def test_constant_data_follows_explicit_euler_reaction():
    g = build_grid([1.0], [8], "neumann")
    dt, steps = 0.05, 20
    tr = integrate(g, generalized_logistic(), constant_field(g, [0.2]), SolveConfig(T=steps * dt, dt=dt))
    u = 0.2
    for _ in range(steps):
        u = u + dt * u * (1 - u)
    np.testing.assert_allclose(tr.final, u, rtol=1e-13)


def test_step_matches_integrate():
    g = build_grid([1.0], [12], "dirichlet")
    u0 = sine_field(g, [1.0, 0.5, 0.2])
    one = step(g, lotka_volterra(), u0, 0.0, 1e-2)
    tr = integrate(g, lotka_volterra(), u0, SolveConfig(T=1e-2, dt=1e-2))
    np.testing.assert_array_equal(one, tr.final)


def test_blow_up_carries_partial_trajectory():
    g = build_grid([1.0], [6], "neumann")
    cubic_growth = scalar_polynomial((0.0, 0.0, 0.0, -1.0), p=4)
    with pytest.raises(BlowUpError) as info:
        integrate(g, cubic_growth, constant_field(g, [2.0]), SolveConfig(T=1.0, dt=1e-2))
    err = info.value
    assert err.component == 0 and 0 < err.t < 1.0
    assert err.trajectory is not None and np.all(np.isfinite(err.trajectory.frames))


def test_rejects_non_finite_initial_data():
    g = build_grid([1.0], [6], "neumann")
    with pytest.raises(GridError):
        integrate(g, zero_reaction(), np.full((1, 6), np.nan), SolveConfig())


def test_positivity_floor_clamps_only_when_enabled():
    g = build_grid([1.0], [6], "neumann")
    sink = scalar_polynomial((1.0,), p=2)  # du/dt = -1
    u0 = constant_field(g, [0.05])
    plain = integrate(g, sink, u0, SolveConfig(T=0.1, dt=0.01))
    floored = integrate(g, sink, u0, SolveConfig(T=0.1, dt=0.01, positivity_floor=True))
    assert plain.min_value < 0 and floored.min_value == 0.0


def test_record_stride_and_rows():
    g = build_grid([1.0], [5], "neumann")
    tr = integrate(g, lotka_volterra(), constant_field(g, [0.1, 0.2, 0.3]),
                   SolveConfig(T=0.1, dt=0.01, record_stride=3))
    np.testing.assert_allclose(tr.times, [0.0, 0.03, 0.06, 0.09, 0.1])
    rows = list(tr.trajectory_rows())
    assert len(rows) == 5 * 3 * 5 and len(rows[0]) == len(tr.trajectory_header())
    assert tr.energy_header() == ["t", "l2_sq", "cum_grad", "cum_lp_1", "cum_lp_2", "cum_lp_3", "cum_forcing"]
    assert len(list(tr.energy_rows())) == 5


def test_positive_part_norm_constant_gap():
    g = build_grid([2.0], [10], "neumann")
    u, v = constant_field(g, [1.0, 0.0]), constant_field(g, [0.5, 1.0])
    assert positive_part_norm(g, u, v) == pytest.approx(np.sqrt(0.25 * 2.0))
    assert positive_part_norm(g, v, v) == 0.0
    with pytest.raises(GridError):
        positive_part_norm(g, u, v[:1])


def test_heat_energy_identity_and_tolerance():
    g = build_grid([1.0], [100], "dirichlet")
    tr = integrate(g, zero_reaction(), sine_field(g, [1.0]), SolveConfig(T=0.1, dt=1e-3, record_stride=10))
    assert tol_disc(tr) == pytest.approx(4.0 * (1e-3 + (1 / 101) ** 2) * (1 + tr.l2_sq[0]))
    rep = check_energy_inequality(tr, 0.0, 1.0, 0.0)
    assert rep.ok and abs(rep.worst_margin) <= rep.tolerance
    # a gradient coefficient ten times too large must be caught
    assert not check_energy_inequality(tr, 0.0, 10.0, 0.0).ok


def test_energy_constant_forcing_paths():
    g = build_grid([1.0], [20], "dirichlet")
    forced = zero_reaction().replace(forcing=lambda t, x: np.ones((1, x.shape[1])))
    tr = integrate(g, forced, sine_field(g, [1.0]), SolveConfig(T=0.05, dt=1e-2))
    C, coef = energy_constant(tr, 0.0, 1.0)
    assert coef == 1.0 and C == pytest.approx(1 / np.pi**2)
    assert check_energy_inequality(tr, 0.0, 1.0, 0.0).ok
    gn = build_grid([1.0], [20], "neumann")
    trn = integrate(gn, forced, constant_field(gn, [1.0]), SolveConfig(T=0.05, dt=1e-2))
    with pytest.raises(ValueError):
        energy_constant(trn, 0.0, 1.0)


def test_norm_bound_lv():
    g = build_grid([1.0], [40], "neumann")
    s = lotka_volterra()
    tr = integrate(g, s, constant_field(g, [0.5, 0.4, 0.3]), SolveConfig(T=0.5, dt=1e-3, record_stride=50))
    assert check_norm_bound(tr, s.C2, 1.0).ok
    with pytest.raises(ValueError):
        check_energy_inequality(tr, s.alpha, 1.0, s.C2, omega_measure=2.0)
