"""Experiments: ordered runs, maximum-principle and L-infinity checks,
Gronwall envelopes and regularization studies.

Every experiment integrates with the IMEX solver and reports on the scheme's
own trajectories. When uniqueness fails these are one computable solution per
datum; the reports say so in their header.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .grid import SpatialGrid, as_field, field_norm
from .reaction import (
    ReactionSystem, SamplePlan, check_cooperative, check_one_sided_lipschitz, dominates, exp_shift,
)
from .regularize import comparison_pipeline, regularize_pipeline, sup_deviation
from .reports import FAIL, PASS, ComparisonReport, EstimateReport, fmt
from .solver import SolveConfig, Trajectory, integrate, positive_part_norm, tol_disc


def comparison_tolerance(*trajs: Trajectory) -> float:
    top = max(float(np.sqrt(np.max(t.l2_sq))) for t in trajs)
    return max(1e-6 * (1.0 + top), 1e-10)


def dt_star(C3: float) -> float:
    return np.inf if C3 <= 0 else 1.0 / (4.0 * C3)


def relaxed_constant(C3: float, K: float, span: float) -> float:
    """``C(tau, T)`` with ``C^2 = K (exp((2 C3 + 1) span) - 1) / (2 C3 + 1)``."""
    rate = 2.0 * C3 + 1.0
    return float(np.sqrt(K * np.expm1(rate * span) / rate))


def gronwall_envelope(times, g0_sq: float, C3: float, epsilon: float, K_hat: float) -> np.ndarray:
    """``(g(tau) + K eps^2 (t - tau)) exp((2 C3 + 1)(t - tau))`` for the squared norm."""
    s = np.asarray(times) - times[0]
    return (g0_sq + K_hat * epsilon**2 * s) * np.exp((2.0 * C3 + 1.0) * s)


def _require_ordered(grid, u01, u02, cone):
    diff = u01 - u02
    if np.any(diff > 0):
        i, j = (int(v) for v in np.argwhere(diff > 0)[0])
        x = ", ".join(f"{c:g}" for c in grid.nodes[:, j])
        raise PreconditionError(
            f"unordered initial data: component {i}, node {j} (x={x}) has "
            f"{u01[i, j]:.17g} > {u02[i, j]:.17g}", component=i, node=j)
    if cone:
        for label, u in (("first", u01), ("second", u02)):
            if np.any(u < 0):
                i, j = (int(v) for v in np.argwhere(u < 0)[0])
                raise PreconditionError(f"{label} initial datum is negative at component {i}, node {j}",
                                        component=i, node=j)


def run_comparison(sys1: ReactionSystem, sys2: ReactionSystem, u01, u02, grid: SpatialGrid,
                   config: SolveConfig, cone: bool | None = None, *, certify: bool = True,
                   C3: float | None = None, epsilon: float = 0.0, plan: SamplePlan | None = None,
                   check_radius: bool = True) -> ComparisonReport:
    """Integrate an ordered pair and record ``|(u1 - u2)^+|`` on every frame.

    With ``certify`` the domination ``sys1 >= sys2`` is checked on samples
    first; ``C3`` defaults to the fitted one-sided constant of ``sys2``.
    """
    if sys1.d != sys2.d:
        raise PreconditionError(f"dimension mismatch: {sys1.d} vs {sys2.d}")
    cone = (sys1.positive_cone or sys2.positive_cone) if cone is None else cone
    u01, u02 = as_field(grid, u01, sys1.d), as_field(grid, u02, sys2.d)
    _require_ordered(grid, u01, u02, cone)
    plan = plan or SamplePlan(times=(config.tau, config.T))
    if certify:
        dom = dominates(sys1, sys2, plan, x=grid.nodes)
        if not dom.ok:
            raise PreconditionError(f"{sys1.name} does not dominate {sys2.name}: {dom.to_line()}")
    if C3 is None:
        C3 = check_one_sided_lipschitz(sys2, plan).constants["C3"]

    tr1 = integrate(grid, sys1, u01, config)
    tr2 = integrate(grid, sys2, u02, config)
    return _comparison_report(grid, sys1.name, sys2.name, tr1, tr2, config, C3, epsilon, cone,
                              (sys1, sys2) if check_radius else (), plan)


def _comparison_report(grid, name1, name2, tr1, tr2, config, C3, epsilon, cone, systems, plan,
                       extra=None) -> ComparisonReport:
    ppn = np.array([positive_part_norm(grid, a, b) for a, b in zip(tr1.frames, tr2.frames)])
    tol = comparison_tolerance(tr1, tr2)
    K_hat = tr1.d * grid.measure
    env_sq = gronwall_envelope(tr1.times, ppn[0] ** 2, C3, epsilon, K_hat)
    envelope = np.sqrt(env_sq)
    max_violation = float(ppn.max())
    R0_required = 2.0 * max(float(tr1.l2_sq.max()), float(tr2.l2_sq.max()))
    covered = {}
    for sys in systems:
        if sys.d > 1:
            rep = check_cooperative(sys, float(np.sqrt(R0_required)), epsilon,
                                    SamplePlan(seed=plan.seed, times=plan.times, positive_cone=cone))
            covered[sys.name] = rep.ok
    info = {"dt_star": dt_star(C3), "tolerance_basis": "1e-6 (1 + max frame L2 norm)"}
    info.update(extra or {})
    return ComparisonReport(
        pair=(name1, name2), times=tr1.times, positive_part=ppn, envelope=envelope, tolerance=tol,
        max_violation=max_violation, verdict=PASS if max_violation <= tol else FAIL,
        dt=tr1.dt, grid_summary=grid.summary(), C3=float(C3), epsilon=float(epsilon),
        R0_required=R0_required, R0_covered=covered, gronwall_margin=envelope - ppn,
        min_value=min(tr1.min_value, tr2.min_value), trajectories=(tr1, tr2), extra=info,
    )


def _map_back(traj: Trajectory, beta: float) -> np.ndarray:
    return np.exp(beta * traj.times)[:, None, None] * traj.frames


def run_shifted_comparison(sys1: ReactionSystem, sys2: ReactionSystem, beta: float, u01, u02,
                           grid: SpatialGrid, config: SolveConfig, cone: bool | None = None,
                           **kwargs) -> ComparisonReport:
    """Compare in ``v = exp(-beta t) u``, map back, and cross-check the direct run."""
    s1, s2 = exp_shift(sys1, beta), exp_shift(sys2, beta)
    u01, u02 = as_field(grid, u01, sys1.d), as_field(grid, u02, sys2.d)
    v01, v02 = s1.to_v(config.tau, u01), s2.to_v(config.tau, u02)
    shifted = run_comparison(s1.system, s2.system, v01, v02, grid, config, cone, **kwargs)
    direct = run_comparison(sys1, sys2, u01, u02, grid, config, cone, **kwargs)
    tr1, tr2 = shifted.trajectories
    back1, back2 = _map_back(tr1, beta), _map_back(tr2, beta)
    d1, d2 = direct.trajectories
    scale = max(np.max(np.abs(d1.frames)), np.max(np.abs(d2.frames)), 1e-300)
    rel = float(max(np.max(np.abs(back1 - d1.frames)), np.max(np.abs(back2 - d2.frames))) / scale)
    ppn = np.array([positive_part_norm(grid, a, b) for a, b in zip(back1, back2)])
    top = max(float(np.sqrt(np.max(np.sum(grid.quad_weights * b**2, axis=(1, 2))))) for b in (back1, back2))
    tol = max(1e-6 * (1.0 + top), 1e-10)
    verdict = PASS if ppn.max() <= tol else FAIL
    extra = dict(shifted.extra)
    extra.update(beta=float(beta), direct_verdict=direct.verdict, agrees=verdict == direct.verdict,
                 back_map_rel_diff=rel, direct_max_violation=direct.max_violation)
    return ComparisonReport(
        pair=(f"{sys1.name}~{beta:g}", f"{sys2.name}~{beta:g}"), times=tr1.times, positive_part=ppn,
        envelope=shifted.envelope * np.exp(beta * tr1.times), tolerance=tol,
        max_violation=float(ppn.max()), verdict=verdict, dt=shifted.dt,
        grid_summary=shifted.grid_summary, C3=shifted.C3, epsilon=shifted.epsilon,
        R0_required=shifted.R0_required, R0_covered=shifted.R0_covered,
        gronwall_margin=shifted.gronwall_margin, min_value=min(float(back1.min()), float(back2.min())),
        trajectories=(tr1, tr2, d1, d2), extra=extra,
    )


def check_max_principle(traj: Trajectory, a, u0, tol: float = 1e-6, neg_tol: float = 1e-8) -> EstimateReport:
    """``0 <= u_i(t, x) <= exp(a_i t) sup u0_i`` per frame, and the aggregate sup bound."""
    if not traj.meta.get("autonomous", True):
        raise PreconditionError("the maximum principle check needs an autonomous model")
    u0 = as_field(traj.grid, u0, traj.d)
    if np.any(u0 < 0):
        raise PreconditionError("initial data must be non-negative")
    a = np.broadcast_to(np.asarray(a, dtype=float), (traj.d,))
    s = traj.times - traj.times[0]
    sup0 = u0.max(axis=1)
    bound = np.exp(np.outer(s, a)) * sup0[None, :]
    upper = bound - traj.frames.max(axis=2)
    lower = traj.frames.min(axis=(1, 2))
    agg = np.exp(a.max() * s) * np.abs(u0).max() - traj.sup_norms()
    k, i = np.unravel_index(int(np.argmin(upper)), upper.shape)
    worst_upper, worst_lower = float(upper[k, i]), float(lower.min())
    ok = worst_upper >= -tol and worst_lower >= -neg_tol and agg.min() >= -tol
    return EstimateReport(
        "max_principle", PASS if ok else FAIL, min(worst_upper, worst_lower + neg_tol - tol), tol,
        where=f"t={fmt(traj.times[k])} component={i}",
        constants={"upper_slack": worst_upper, "min_value": worst_lower,
                   "aggregate_slack": float(agg.min()), "min_value_tol": neg_tol},
    )


def check_linf_domination(traj_lv: Trajectory, traj_lin: Trajectory, lambda1: float, a: float,
                          D: float, tol: float = 1e-6, t_min: float | None = None) -> EstimateReport:
    """Pointwise domination plus a fitted ``C t^{-3/4} exp((a - D lambda1) t) |u0|`` envelope."""
    for tr in (traj_lv, traj_lin):
        if not tr.meta.get("autonomous", True):
            raise PreconditionError("the L-infinity estimate needs autonomous models")
    if traj_lv.frames.shape != traj_lin.frames.shape:
        raise PreconditionError("trajectories must share frames")
    dom = float(np.max(traj_lv.frames - traj_lin.frames))
    s = traj_lv.times - traj_lv.times[0]
    t_min = 5.0 * traj_lv.dt if t_min is None else t_min
    window = s >= t_min - 1e-12
    u0_norm = field_norm(traj_lv.grid, traj_lv.frames[0], "L2")
    sup = traj_lv.sup_norms()
    rate = a - D * lambda1
    shape = s[window] ** -0.75 * np.exp(rate * s[window]) * u0_norm
    C_hat = float(np.max(sup[window] / shape)) if u0_norm > 0 else 0.0
    first, last = sup[window][0], sup[window][-1]
    decays = bool(last < first) if rate < 0 and u0_norm > 0 else True
    ok = dom <= tol and np.isfinite(C_hat) and decays
    return EstimateReport(
        "linf_domination", PASS if ok else FAIL, tol - dom, tol,
        where=f"t in [{fmt(t_min)}, {fmt(s[-1])}]",
        constants={"max_lv_minus_lin": dom, "C_hat": C_hat, "rate": rate,
                   "sup_t_min": float(first), "sup_T": float(last), "decays": decays},
        note="fitted constant; the shape is asserted, not a specific C",
    )


@dataclass(frozen=True, eq=False)
class GronwallSeries:
    times: np.ndarray
    g: np.ndarray
    envelope: np.ndarray
    tolerance: float
    C3: float
    epsilon: float
    K_hat: float

    @property
    def margin(self) -> np.ndarray:
        return self.envelope - self.g

    @property
    def verdict(self) -> str:
        return PASS if np.min(self.margin) >= -self.tolerance else FAIL

    @property
    def ok(self) -> bool:
        return self.verdict == PASS

    def to_line(self) -> str:
        k = int(np.argmin(self.margin))
        return (f"gronwall: {self.verdict} worst margin={fmt(self.margin[k])} at t={fmt(self.times[k])} "
                f"(tolerance {fmt(self.tolerance)}) [C3={fmt(self.C3)} epsilon={fmt(self.epsilon)} "
                f"K={fmt(self.K_hat)}]")

    def csv_rows(self):
        for t, g, e in zip(self.times, self.g, self.envelope):
            yield [fmt(t), fmt(g), fmt(e), fmt(int(g > e + self.tolerance))]


def gronwall_diagnostic(traj1: Trajectory, traj2: Trajectory, C3: float, epsilon: float = 0.0,
                        K_hat: float | None = None) -> GronwallSeries:
    """Squared positive part against ``(g(tau) + K eps^2 (t - tau)) e^{(2 C3 + 1)(t - tau)}``."""
    if traj1.times.shape != traj2.times.shape or not np.allclose(traj1.times, traj2.times):
        raise PreconditionError("trajectories must share recorded times")
    grid = traj1.grid
    g = np.array([positive_part_norm(grid, a, b) ** 2 for a, b in zip(traj1.frames, traj2.frames)])
    K_hat = traj1.d * grid.measure if K_hat is None else K_hat
    env = gronwall_envelope(traj1.times, g[0], C3, epsilon, K_hat)
    tol = max(tol_disc(traj1), tol_disc(traj2)) * float(np.max(env) + 1e-12)
    return GronwallSeries(traj1.times, g, env, tol, float(C3), float(epsilon), float(K_hat))


def run_pipeline_comparison(sys1: ReactionSystem, sys2: ReactionSystem, n: float, k: float, u01, u02,
                            grid: SpatialGrid, config: SolveConfig, gamma_bar: float = 0.5,
                            plan: SamplePlan | None = None) -> ComparisonReport:
    """Blended pair ``l1 >= l2`` run against the bound ``|(u1 - u2)^+| <= 2 C(tau, T) delta``."""
    pipe = comparison_pipeline(sys1, sys2, n, k, gamma_bar)
    plan = plan or SamplePlan(times=(config.tau, config.T), positive_cone=True)
    C3 = check_one_sided_lipschitz(pipe.l2, plan).constants["C3"]
    eps = 2.0 * pipe.delta
    rep = run_comparison(pipe.l1, pipe.l2, u01, u02, grid, config, True, certify=True, C3=C3,
                         epsilon=eps, plan=plan, check_radius=False)
    K = sys1.d * grid.measure
    span = config.T - config.tau
    bound = relaxed_constant(C3, K, span) * eps
    extra = dict(rep.extra, delta=pipe.delta, epsilon_k=pipe.epsilon, C_tau_T=relaxed_constant(C3, K, span),
                 bound=bound, bound_slack=bound - rep.max_violation, n=n, k=k)
    verdict = PASS if rep.max_violation <= bound else FAIL
    return ComparisonReport(
        pair=rep.pair, times=rep.times, positive_part=rep.positive_part, envelope=rep.envelope,
        tolerance=bound, max_violation=rep.max_violation, verdict=verdict, dt=rep.dt,
        grid_summary=rep.grid_summary, C3=C3, epsilon=eps, R0_required=rep.R0_required,
        R0_covered={pipe.l2.name: check_cooperative(pipe.l2, float(n), eps, plan).ok},
        gronwall_margin=rep.gronwall_margin, min_value=rep.min_value, trajectories=rep.trajectories,
        extra=extra,
    )


@dataclass(frozen=True)
class StudyRow:
    k: float
    epsilon_k: float
    sup_deviation: float
    traj_distance: float

    def cells(self):
        return [fmt(self.k), fmt(self.epsilon_k), fmt(self.sup_deviation), fmt(self.traj_distance)]


STUDY_CSV_HEADER = ["k", "epsilon_k", "sup_deviation", "traj_distance"]


@dataclass(frozen=True, eq=False)
class StudyTable:
    rows: tuple
    A: float
    trajectories: tuple = field(default=(), repr=False)

    @staticmethod
    def _non_increasing(values, noise=0.10):
        return all(b <= a * (1 + noise) + 1e-15 for a, b in zip(values, values[1:]))

    @property
    def deviation_monotone(self) -> bool:
        return self._non_increasing([r.sup_deviation for r in self.rows])

    @property
    def distance_monotone(self) -> bool:
        return self._non_increasing([r.traj_distance for r in self.rows])

    @property
    def ok(self) -> bool:
        return self.deviation_monotone and self.distance_monotone


def regularization_convergence_study(sys: ReactionSystem, ks, A: float, grid: SpatialGrid,
                                     config: SolveConfig, u0, jobs: int = 1) -> StudyTable:
    """Regularize at each ``k``, integrate from ``u0`` and measure against the finest ``k``."""
    ks = list(ks)
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValueError("ks must be increasing")
    u0 = as_field(grid, u0, sys.d)

    def run(k):
        pipe = regularize_pipeline(sys, k)
        dev = sup_deviation(sys, pipe.system, A)
        return pipe, dev, integrate(grid, pipe.system, u0, config)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, ks))
    else:
        results = [run(k) for k in ks]
    ref = results[-1][2]
    rows = []
    for k, (pipe, dev, traj) in zip(ks, results):
        dist = max(field_norm(grid, a - b, "L2") for a, b in zip(traj.frames, ref.frames))
        rows.append(StudyRow(float(k), pipe.epsilon, dev, dist))
    return StudyTable(tuple(rows), float(A), tuple(r[2] for r in results))
