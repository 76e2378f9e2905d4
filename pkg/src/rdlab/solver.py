"""IMEX time stepping for ``du/dt = D Lap_h u - f(t, u) + h(t, x)``.

Reaction and forcing are explicit; diffusion is implicit with ``theta = 1``
(backward Euler) or ``theta = 1/2`` (Crank-Nicolson). In 1D every component
is one sparse LU solve per step; in 2D the Douglas splitting replaces the
full solve by line solves along x and then y.

``integrate`` also accumulates the energy quantities used by the a-posteriori
checks, with the trapezoid rule in time over every step, not only over the
recorded frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import BlowUpError, GridError
from .grid import DIRICHLET, SpatialGrid, as_field, gradient_sq, integrate_nodes, principal_eigenvalue
from .reaction import ReactionSystem, forcing_values
from .reports import FAIL, PASS, EstimateReport, fmt

BACKWARD_EULER = "backward_euler"
CRANK_NICOLSON = "crank_nicolson"
SCHEMES = {BACKWARD_EULER: 1.0, CRANK_NICOLSON: 0.5}

# Discretization allowance c0 in tol_disc = c0 * (dt + h^2) * (1 + max ||u||^2).
# Frozen from calibrate_c0() on the heat benchmark: measured at most 1.62 over
# n in {20, 50, 100} and dt in [1e-4, 5e-3], both schemes; factor 2.5 on top.
C0_DISC = 4.0


def normalize_scheme(scheme: str) -> str:
    key = str(scheme).strip().lower().replace("-", "_")
    aliases = {"be": BACKWARD_EULER, "backwardeuler": BACKWARD_EULER,
               "cn": CRANK_NICOLSON, "cranknicolson": CRANK_NICOLSON}
    key = aliases.get(key.replace("_", ""), key)
    if key not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {', '.join(SCHEMES)}")
    return key


@dataclass(frozen=True)
class SolveConfig:
    tau: float = 0.0
    T: float = 1.0
    dt: float = 1e-3
    scheme: str = BACKWARD_EULER
    record_stride: int = 1
    positivity_floor: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scheme", normalize_scheme(self.scheme))
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.T > self.tau:
            raise ValueError(f"need T > tau, got tau={self.tau}, T={self.T}")
        if (self.T - self.tau) / self.dt < 1 - 1e-12:
            raise ValueError("the interval must hold at least one step")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        return max(1, int(round((self.T - self.tau) / self.dt)))

    @property
    def step_size(self) -> float:
        """Step actually used: ``(T - tau) / n_steps`` so the last step lands on ``T``."""
        return (self.T - self.tau) / self.n_steps

    @property
    def theta(self) -> float:
        return SCHEMES[self.scheme]


class ImexStepper:
    """Caches the factorized implicit operators for one (grid, system, dt, scheme)."""

    def __init__(self, grid: SpatialGrid, sys: ReactionSystem, dt: float, scheme: str = BACKWARD_EULER):
        self.grid, self.sys, self.dt = grid, sys, float(dt)
        self.theta = SCHEMES[normalize_scheme(scheme)]
        self.x = grid.nodes
        self._lu = []
        for D in sys.diffusion:
            if grid.dim == 1:
                M = sp.identity(grid.n_nodes, format="csc") - self.theta * self.dt * D * grid.laplacian
                self._lu.append((splu(M.tocsc()),))
            else:
                pair = []
                for a in range(2):
                    La = grid.laplacian_1d(a)
                    M = sp.identity(grid.n_cells[a], format="csc") - self.theta * self.dt * D * La
                    pair.append(splu(M.tocsc()))
                self._lu.append(tuple(pair))

    def reaction_rhs(self, t, u):
        with np.errstate(over="ignore", invalid="ignore"):
            r = -np.asarray(self.sys.f(t, u), dtype=float)
        if self.sys.forcing is not None:
            r = r + forcing_values(self.sys, t, self.x)
        return r

    def __call__(self, u, t):
        dt, theta = self.dt, self.theta
        r = self.reaction_rhs(t, u)
        out = np.empty_like(u)
        L = self.grid.laplacian
        for i, D in enumerate(self.sys.diffusion):
            lap = L @ u[i]
            if self.grid.dim == 1:
                rhs = u[i] + dt * r[i]
                if theta < 1:
                    rhs = rhs + (1 - theta) * dt * D * lap
                out[i] = self._lu[i][0].solve(rhs)
            else:
                # Douglas splitting in increment form
                lux, luy = self._lu[i]
                incr = (dt * (D * lap + r[i])).reshape(self.grid.shape)
                incr = lux.solve(incr)
                incr = luy.solve(incr.T).T
                out[i] = u[i] + incr.ravel()
        return out


def step(grid: SpatialGrid, sys: ReactionSystem, state, t: float, dt: float,
         scheme: str = BACKWARD_EULER) -> np.ndarray:
    """One IMEX step from ``t`` to ``t + dt``."""
    u = as_field(grid, state, sys.d)
    out = ImexStepper(grid, sys, dt, scheme)(u, t)
    _check_finite(out, t + dt)
    return out


def _check_finite(u, t, trajectory=None):
    bad = ~np.isfinite(u)
    if bad.any():
        comp = int(np.argwhere(bad)[0][0])
        raise BlowUpError(f"non-finite values in component {comp} at t={t:g}", t=t, component=comp,
                          trajectory=trajectory)


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: SpatialGrid
    times: np.ndarray
    frames: np.ndarray
    l2_sq: np.ndarray
    cum_grad_comp: np.ndarray
    cum_lp: np.ndarray
    cum_forcing: np.ndarray
    min_value: float
    exponents: tuple
    diffusion: tuple
    dt: float
    scheme: str
    has_forcing: bool = False
    name: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def cum_grad(self) -> np.ndarray:
        return self.cum_grad_comp.sum(axis=1)

    @property
    def d(self) -> int:
        return self.frames.shape[1]

    @property
    def final(self) -> np.ndarray:
        return self.frames[-1]

    def sup_norms(self) -> np.ndarray:
        return np.max(np.abs(self.frames), axis=(1, 2))

    def trajectory_rows(self):
        nodes = self.grid.nodes
        for t, frame in zip(self.times, self.frames):
            for i in range(self.d):
                for j in range(self.grid.n_nodes):
                    yield [fmt(t), j, *(fmt(c) for c in nodes[:, j]), i, fmt(frame[i, j])]

    def trajectory_header(self):
        coords = ["x"] if self.grid.dim == 1 else ["x", "y"]
        return ["t", "node_index", *coords, "component", "value"]

    def energy_rows(self):
        for k, t in enumerate(self.times):
            yield [fmt(t), fmt(self.l2_sq[k]), fmt(self.cum_grad[k]),
                   *(fmt(v) for v in self.cum_lp[k]), fmt(self.cum_forcing[k])]

    def energy_header(self):
        return ["t", "l2_sq", "cum_grad", *(f"cum_lp_{i + 1}" for i in range(self.d)), "cum_forcing"]


class _Diagnostics:
    def __init__(self, grid, sys, u0, t0):
        self.grid, self.sys = grid, sys
        self.p = np.asarray(sys.exponents)[:, None]
        self.times, self.frames = [], []
        self.l2, self.grad, self.lp, self.forc = [], [], [], []
        self.cur_grad = np.zeros(sys.d)
        self.cur_lp = np.zeros(sys.d)
        self.cur_forc = 0.0
        self.prev = self._instant(u0, t0)
        self.min_value = float(u0.min())

    def _instant(self, u, t):
        g = np.array([gradient_sq(self.grid, u[i]) for i in range(self.sys.d)])
        lp = integrate_nodes(self.grid, np.abs(u) ** self.p)
        hsq = 0.0
        if self.sys.forcing is not None:
            hsq = float(np.sum(integrate_nodes(self.grid, forcing_values(self.sys, t, self.grid.nodes) ** 2)))
        return g, lp, hsq + 1.0

    def advance(self, u, t, dt):
        cur = self._instant(u, t)
        self.cur_grad += 0.5 * dt * (self.prev[0] + cur[0])
        self.cur_lp += 0.5 * dt * (self.prev[1] + cur[1])
        self.cur_forc += 0.5 * dt * (self.prev[2] + cur[2])
        self.prev = cur
        self.min_value = min(self.min_value, float(u.min()))

    def record(self, u, t):
        self.times.append(t)
        self.frames.append(u.copy())
        self.l2.append(float(np.sum(integrate_nodes(self.grid, u**2))))
        self.grad.append(self.cur_grad.copy())
        self.lp.append(self.cur_lp.copy())
        self.forc.append(self.cur_forc)

    def build(self, config, dt):
        return Trajectory(
            grid=self.grid, times=np.array(self.times), frames=np.array(self.frames),
            l2_sq=np.array(self.l2), cum_grad_comp=np.array(self.grad), cum_lp=np.array(self.lp),
            cum_forcing=np.array(self.forc), min_value=self.min_value,
            exponents=self.sys.exponents, diffusion=self.sys.diffusion, dt=dt,
            scheme=config.scheme, has_forcing=self.sys.forcing is not None, name=self.sys.name,
            meta={"autonomous": self.sys.autonomous},
        )


def integrate(grid: SpatialGrid, sys: ReactionSystem, u_init, config: SolveConfig) -> Trajectory:
    u = as_field(grid, u_init, sys.d).copy()
    if not np.all(np.isfinite(u)):
        raise GridError("initial data must be finite")
    n, dt = config.n_steps, config.step_size
    stepper = ImexStepper(grid, sys, dt, config.scheme)
    diag = _Diagnostics(grid, sys, u, config.tau)
    diag.record(u, config.tau)
    for k in range(1, n + 1):
        t_prev = config.tau + (k - 1) * dt
        u = stepper(u, t_prev)
        t = config.T if k == n else config.tau + k * dt
        if not np.all(np.isfinite(u)):
            _check_finite(u, t, trajectory=diag.build(config, dt))
        if config.positivity_floor:
            np.maximum(u, 0.0, out=u)
        # finite but huge states may overflow the energy sums; inf is the honest value
        with np.errstate(over="ignore"):
            diag.advance(u, t, dt)
            if k % config.record_stride == 0 or k == n:
                diag.record(u, t)
    return diag.build(config, dt)


def positive_part_norm(grid: SpatialGrid, u, v) -> float:
    """``sqrt(sum_i int ((u_i - v_i)^+)^2)``."""
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise GridError(f"shape mismatch: {u.shape} vs {v.shape}")
    w = np.maximum(np.atleast_2d(u - v), 0.0)
    return float(np.sqrt(np.sum(integrate_nodes(grid, w * w))))


def tol_disc(traj: Trajectory, c0: float = C0_DISC) -> float:
    return c0 * (traj.dt + traj.grid.h_max**2) * (1.0 + float(np.max(traj.l2_sq)))


def energy_constant(traj: Trajectory, C2: float, beta: float) -> tuple[float, float]:
    """Return ``(C, gradient coefficient)`` for the energy inequality.

    Without forcing ``C = 2 C2 |Omega|`` with gradient coefficient ``2 beta``;
    with forcing (Dirichlet only) the cross term is absorbed through the
    Poincare inequality, leaving ``beta`` and ``max(2 C2 |Omega|, 1/(beta lambda1))``.
    """
    measure = traj.grid.measure
    if not traj.has_forcing:
        return 2.0 * C2 * measure, 2.0 * beta
    if traj.grid.bc != DIRICHLET:
        raise ValueError("the forced energy check needs Dirichlet boundary conditions")
    lam1 = principal_eigenvalue(traj.grid)
    return max(2.0 * C2 * measure, 1.0 / (beta * lam1)), beta


def check_energy_inequality(traj: Trajectory, alpha: float, beta: float, C2: float,
                            omega_measure: float | None = None, c0: float = C0_DISC) -> EstimateReport:
    """Worst slack over recorded pairs ``s < t`` of

    ``|u(t)|^2 + b int_s^t |grad u|^2 + 2 alpha sum int_s^t |u_i|_p^p
    <= |u(s)|^2 + C int_s^t (|h|^2 + 1)``.
    """
    if omega_measure is not None and not np.isclose(omega_measure, traj.grid.measure):
        raise ValueError("omega_measure does not match the trajectory grid")
    C, grad_coef = energy_constant(traj, C2, beta)
    E, G = traj.l2_sq, traj.cum_grad
    Pl = traj.cum_lp.sum(axis=1)
    H = traj.cum_forcing
    lhs = E[None, :] + grad_coef * (G[None, :] - G[:, None]) + 2 * alpha * (Pl[None, :] - Pl[:, None])
    rhs = E[:, None] + C * (H[None, :] - H[:, None])
    slack = rhs - lhs
    slack = np.where(np.triu(np.ones_like(slack, dtype=bool), k=1), slack, np.inf)
    s_idx, t_idx = np.unravel_index(int(np.argmin(slack)), slack.shape)
    worst = float(slack[s_idx, t_idx])
    tol = tol_disc(traj, c0)
    verdict = PASS if worst >= -tol else FAIL
    return EstimateReport(
        "energy_inequality", verdict, worst, tol,
        where=f"s={fmt(traj.times[s_idx])} t={fmt(traj.times[t_idx])}",
        constants={"C": C, "grad_coef": grad_coef, "alpha_coef": 2 * alpha, "c0": c0},
        note="C = 2 C2 |Omega| from the dissipation bound" if not traj.has_forcing
        else "forcing absorbed with the Poincare inequality",
    )


def check_norm_bound(traj: Trajectory, C2: float, beta: float, c0: float = C0_DISC) -> EstimateReport:
    """``|u(t)|^2 <= |u(tau)|^2 + C int_tau^t (|h|^2 + 1)`` at every recorded time."""
    C, _ = energy_constant(traj, C2, beta)
    bound = traj.l2_sq[0] + C * (traj.cum_forcing - traj.cum_forcing[0])
    slack = bound - traj.l2_sq
    k = int(np.argmin(slack))
    tol = tol_disc(traj, c0)
    verdict = PASS if slack[k] >= -tol else FAIL
    return EstimateReport("norm_bound", verdict, float(slack[k]), tol,
                          where=f"t={fmt(traj.times[k])}", constants={"C": C})


def calibrate_c0(ns=(20, 50, 100), dts=(1e-4, 5e-4, 1e-3, 5e-3), T: float = 0.2) -> float:
    """Largest ``violation / ((dt + h^2)(1 + max |u|^2))`` of the pure-heat energy check."""
    from .grid import build_grid, sine_field
    from .models import zero_reaction

    worst = 0.0
    for n, bc in ((n, bc) for n in ns for bc in ("dirichlet", "neumann")):
        grid = build_grid([1.0], [n], bc)
        u0 = sine_field(grid, [1.0]) if bc == "dirichlet" else np.cos(np.pi * grid.nodes)
        for scheme in SCHEMES:
            for dt in dts:
                traj = integrate(grid, zero_reaction(), u0, SolveConfig(0.0, T, dt, scheme))
                rep = check_energy_inequality(traj, 0.0, 1.0, 0.0, c0=1.0)
                worst = max(worst, -rep.worst_margin / rep.tolerance)
    return worst
