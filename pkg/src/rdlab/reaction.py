"""Reaction terms f(t, u) with forcing h(t, x), and sampled certifiers.

Sign convention: ``f`` is the term on the left of
``du/dt - D Lap u + f(t, u) = h``, so the ODE right-hand side is ``-f + h``.

Nonlinearities are vectorized: ``f(t, u)`` receives ``u`` of shape ``(d, ...)``
and returns an array of the same shape. Forcing receives node coordinates of
shape ``(dim, m)`` and returns ``(d, m)``.

The ``check_*`` functions test hypotheses on a deterministic sample of states;
a pass means "no counterexample among N samples", never a proof.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ReactionEvaluationError
from .reports import FAIL, PASS, PASS_WITH_CONSTANT, ConditionReport, Witness

EPS_FD = np.finfo(float).eps ** (1.0 / 3.0)


@dataclass(frozen=True, eq=False)
class ReactionSystem:
    d: int
    f: Callable
    diffusion: tuple[float, ...]
    exponents: tuple[float, ...]
    jac: Callable | None = None
    forcing: Callable | None = None
    alpha: float | None = None
    C1: float | None = None
    C2: float | None = None
    sublinear: bool = False
    positive_cone: bool = False
    autonomous: bool = True
    name: str = "f"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"component count must be positive, got {self.d}")
        diffusion = tuple(float(x) for x in np.broadcast_to(self.diffusion, (self.d,)))
        if any(x <= 0 for x in diffusion):
            raise ValueError(f"diffusion coefficients must be positive, got {diffusion}")
        if self.sublinear:
            exponents = (2.0,) * self.d
        else:
            exponents = tuple(float(x) for x in np.broadcast_to(self.exponents, (self.d,)))
            if any(p < 2 for p in exponents):
                raise ValueError(f"growth exponents must be >= 2, got {exponents}")
        object.__setattr__(self, "diffusion", diffusion)
        object.__setattr__(self, "exponents", exponents)

    @property
    def conjugate_exponents(self) -> np.ndarray:
        p = np.asarray(self.exponents)
        return p / (p - 1.0)

    def __call__(self, t, u):
        return eval_reaction(self, t, u)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def eval_reaction(sys: ReactionSystem, t, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    out = np.asarray(sys.f(t, u), dtype=float)
    if not np.all(np.isfinite(out)):
        bad = np.argwhere(~np.isfinite(out))[0]
        u_bad = u[(slice(None),) + tuple(bad[1:])] if u.ndim > 1 else u
        raise ReactionEvaluationError(
            f"{sys.name} is not finite at t={t}, u={np.array2string(u_bad)}", t=t, u=u_bad
        )
    return out


def forcing_values(sys: ReactionSystem, t, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if sys.forcing is None:
        return np.zeros((sys.d, x.shape[1]))
    return np.broadcast_to(np.asarray(sys.forcing(t, x), dtype=float), (sys.d, x.shape[1]))


def jacobian(sys: ReactionSystem, t, u) -> np.ndarray:
    """Jacobian ``df/du``: shape ``(d, d)`` or ``(d, d, m)`` for batched ``u``.

    Falls back to central differences with step ``EPS_FD * max(1, |u_j|)``.
    """
    u = np.asarray(u, dtype=float)
    if sys.jac is not None:
        J = np.asarray(sys.jac(t, u), dtype=float)
    else:
        J = fd_jacobian(sys.f, t, u)
    if not np.all(np.isfinite(J)):
        raise ReactionEvaluationError(f"Jacobian of {sys.name} is not finite at t={t}", t=t, u=u)
    return J


def fd_jacobian(f, t, u, eps=EPS_FD) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    d = u.shape[0]
    J = np.empty((d, d) + u.shape[1:])
    for j in range(d):
        step = eps * np.maximum(1.0, np.abs(u[j]))
        up, um = u.copy(), u.copy()
        up[j] = u[j] + step
        um[j] = u[j] - step
        J[:, j] = (np.asarray(f(t, up)) - np.asarray(f(t, um))) / (up[j] - um[j])
    return J


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class SamplePlan:
    """Deterministic sample of states for the certifiers.

    Uniform draws in balls of radius ``radii`` plus ``R0``, the axis rays and
    the all-ones diagonal out to ``ray_max``, and the origin. In the positive
    cone the samples are folded by absolute value.
    """

    seed: int = 20240601
    radii: tuple[float, ...] = (0.1, 1.0, 10.0)
    R0: float = 2.0
    per_ball: int = 512
    ray_max: float = 20.0
    ray_points: int = 16
    times: tuple[float, ...] = (0.0,)
    positive_cone: bool | None = None

    def cone_for(self, sys: ReactionSystem) -> bool:
        return sys.positive_cone if self.positive_cone is None else self.positive_cone

    def rng(self, salt: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])

    def ray_radii(self) -> np.ndarray:
        return np.geomspace(0.05, self.ray_max, self.ray_points)

    def points(self, d: int, cone: bool) -> np.ndarray:
        rng = self.rng(d)
        chunks = [np.zeros((d, 1))]
        for R in sorted(set(self.radii) | {self.R0}):
            chunks.append(ball_samples(rng, d, R, self.per_ball))
        r = self.ray_radii()
        for i in range(d):
            e = np.zeros((d, 1))
            e[i] = 1.0
            chunks += [e * r, -e * r]
        ones = np.ones((d, 1)) / np.sqrt(d)
        chunks += [ones * r, -ones * r]
        pts = np.hstack(chunks)
        return np.abs(pts) if cone else pts


def ball_samples(rng: np.random.Generator, d: int, R: float, n: int) -> np.ndarray:
    direction = rng.standard_normal((d, n))
    direction /= np.linalg.norm(direction, axis=0)
    radius = R * rng.random(n) ** (1.0 / d)
    return direction * radius


def _witness(t, U, margins, col, component=None, V=None) -> Witness:
    return Witness(
        t=float(t),
        u=tuple(float(x) for x in U[:, col]),
        margin=float(margins[col]),
        v=None if V is None else tuple(float(x) for x in V[:, col]),
        component=component,
    )


# ---------------------------------------------------------------------------
# certifiers


def _absorb_rounding(margin, scale):
    """Zero out margins that are negative only at rounding level of the terms compared."""
    slack = 64 * np.finfo(float).eps * scale
    return np.where((margin < 0) & (margin >= -slack), 0.0, margin)


def check_growth(sys: ReactionSystem, plan: SamplePlan | None = None) -> ConditionReport:
    """Polynomial growth bound; the sublinear form ``|f| <= C1 (1 + |u|)`` if flagged."""
    plan = plan or SamplePlan()
    U = plan.points(sys.d, plan.cone_for(sys))
    p = np.asarray(sys.exponents)[:, None]
    q = p / (p - 1.0)
    norms = np.linalg.norm(U, axis=0)
    worst = None
    ratios_all, lhs_all, rhs_all, t_all = [], [], [], []
    for t in plan.times:
        F = eval_reaction(sys, t, U)
        if sys.sublinear:
            lhs = np.linalg.norm(F, axis=0)
            rhs = 1.0 + norms
        else:
            lhs = np.sum(np.abs(F) ** q, axis=0)
            rhs = 1.0 + np.sum(np.abs(U) ** p, axis=0)
        ratios_all.append(lhs / rhs)
        lhs_all.append(lhs)
        rhs_all.append(rhs)
        t_all.append(t)
    ratios = np.vstack(ratios_all)
    C1_min = float(ratios.max())
    n = ratios.size
    consts = {"C1_min": C1_min}

    if sys.C1 is not None:
        consts = {"C1": float(sys.C1), **consts}
        for t, lhs, rhs in zip(t_all, lhs_all, rhs_all):
            margin = _absorb_rounding(sys.C1 * rhs - lhs, sys.C1 * rhs + lhs)
            col = int(np.argmin(margin))
            if worst is None or margin[col] < worst.margin:
                worst = _witness(t, U, margin, col)
        verdict = FAIL if worst.margin < 0 else PASS
        return ConditionReport("growth", verdict, consts, worst, n, plan.seed)

    # No declared constant: the ratio must level off along the rays, otherwise
    # the declared exponents are too small for f.
    inner = norms <= plan.ray_max / 2
    C1_inner = float(ratios[:, inner].max())
    for t, lhs, rhs in zip(t_all, lhs_all, rhs_all):
        margin = C1_inner * rhs - lhs
        col = int(np.argmin(margin))
        if worst is None or margin[col] < worst.margin:
            worst = _witness(t, U, margin, col)
    growing = ratios.max() > 1.5 * C1_inner and worst.margin < 0
    if growing:
        return ConditionReport(
            "growth", FAIL, consts, worst, n, plan.seed,
            note="ratio still growing along the outer rays",
        )
    k, col = np.unravel_index(int(np.argmax(ratios)), ratios.shape)
    tight = _witness(t_all[k], U, np.zeros(U.shape[1]), col)
    return ConditionReport("growth", PASS_WITH_CONSTANT, consts, tight, n, plan.seed)


def check_dissipation(
    sys: ReactionSystem, plan: SamplePlan | None = None, r_fit: float | None = None
) -> ConditionReport:
    """``(f, u) >= alpha sum |u_i|^p_i - C2``; ``alpha`` may be <= 0 only when sublinear."""
    plan = plan or SamplePlan()
    U = plan.points(sys.d, plan.cone_for(sys))
    p = np.asarray(sys.exponents)[:, None]
    S = np.sum(np.abs(U) ** p, axis=0)
    norms = np.linalg.norm(U, axis=0)
    r_fit = plan.R0 if r_fit is None else r_fit
    pos = S > 0
    products = [(t, np.sum(eval_reaction(sys, t, U) * U, axis=0)) for t in plan.times]
    n = len(products) * U.shape[1]

    if sys.C2 is not None:
        C2 = float(sys.C2)
        alpha_max = min(float(np.min((P[pos] + C2) / S[pos])) for _, P in products)
    else:
        outer = pos & (norms >= r_fit)
        alpha_max = min(float(np.min(P[outer] / S[outer])) for _, P in products)
        C2 = max(0.0, max(float(np.max(alpha_max * S - P)) for _, P in products))

    alpha = float(sys.alpha) if sys.alpha is not None else alpha_max
    if not sys.sublinear and alpha <= 0:
        # probe with a tiny positive alpha: every sample at the minimizer violates
        alpha = 1e-12
    consts = {"alpha": alpha, "alpha_max": alpha_max, "C2": C2,
              "alpha_nonpositive": alpha_max <= 0}
    worst = None
    for t, P in products:
        margin = _absorb_rounding(P - (alpha * S - C2), np.abs(P) + abs(alpha) * S + C2)
        col = int(np.argmin(margin))
        if worst is None or margin[col] < worst.margin:
            worst = _witness(t, U, margin, col)
    if worst.margin < 0:
        return ConditionReport("dissipation", FAIL, consts, worst, n, plan.seed)
    verdict = PASS if sys.alpha is not None and sys.C2 is not None else PASS_WITH_CONSTANT
    note = "sublinear form, alpha <= 0: route through exp_shift" if alpha_max <= 0 else ""
    return ConditionReport("dissipation", verdict, consts, worst, n, plan.seed, note=note)


def check_one_sided_lipschitz(sys: ReactionSystem, plan: SamplePlan | None = None) -> ConditionReport:
    """Estimate ``C3 = max(0, max -lambda_min(sym f_u))`` over the samples."""
    plan = plan or SamplePlan()
    U = plan.points(sys.d, plan.cone_for(sys))
    C3, worst = 0.0, None
    for t in plan.times:
        J = jacobian(sys, t, U)
        sym = 0.5 * (J + np.swapaxes(J, 0, 1))
        lam = np.linalg.eigvalsh(np.moveaxis(sym, -1, 0))[:, 0]
        col = int(np.argmin(lam))
        if worst is None or lam[col] < worst.margin:
            worst = _witness(t, U, lam, col)
        C3 = max(C3, float(-lam[col]))
    # margin lambda_min + C3 is zero at the binding sample
    worst = dataclasses.replace(worst, margin=float(worst.margin + C3))
    return ConditionReport(
        "one_sided_lipschitz", PASS_WITH_CONSTANT, {"C3": C3}, worst,
        U.shape[1] * len(plan.times), plan.seed,
    )


def check_cooperative(
    sys: ReactionSystem, R0: float, epsilon: float = 0.0, plan: SamplePlan | None = None
) -> ConditionReport:
    """Cooperativity in the closed ball of radius ``R0`` (relaxed by ``epsilon``).

    Runs a pairwise test on ordered pairs ``u <= v`` with ``u_i = v_i`` and a
    Jacobian test ``df_i/du_j <= epsilon / R0`` for ``j != i``; both must pass.
    """
    if R0 <= 0 or epsilon < 0:
        raise ValueError("need R0 > 0 and epsilon >= 0")
    plan = plan or SamplePlan()
    consts = {"R0": float(R0), "epsilon": float(epsilon)}
    if sys.d == 1:
        return ConditionReport("cooperative", PASS, consts, None, 0, plan.seed,
                               note="scalar system, vacuous")
    cone = plan.cone_for(sys)
    rng = plan.rng(101)
    U = np.hstack([np.zeros((sys.d, 1)), ball_samples(rng, sys.d, R0, 2 * plan.per_ball)])
    diag = np.ones((sys.d, 1)) / np.sqrt(sys.d) * np.linspace(0, R0, 9)
    U = np.hstack([U, diag, -diag])
    if cone:
        U = np.abs(U)
    n_samples = 0
    worst = None

    for t in plan.times:
        for i in range(sys.d):
            delta = np.abs(rng.standard_normal(U.shape)) * (R0 / 2)
            delta[i] = 0.0
            s = _step_to_ball(U, delta, R0)
            V = U + s * delta
            V[i] = U[i]
            margin = eval_reaction(sys, t, U)[i] - eval_reaction(sys, t, V)[i] + epsilon
            n_samples += margin.size
            col = int(np.argmin(margin))
            if worst is None or margin[col] < worst.margin:
                worst = _witness(t, U, margin, col, component=i, V=V)
    pair_ok = worst.margin >= 0
    pair_witness = worst

    worst_jac = None
    for t in plan.times:
        J = jacobian(sys, t, U)
        for i in range(sys.d):
            for j in range(sys.d):
                if i == j:
                    continue
                margin = epsilon / R0 - J[i, j]
                n_samples += margin.size
                col = int(np.argmin(margin))
                if worst_jac is None or margin[col] < worst_jac.margin:
                    worst_jac = _witness(t, U, margin, col, component=i)
    jac_ok = worst_jac.margin >= 0
    consts.update(pairwise=pair_ok, jacobian=jac_ok)

    if pair_ok and jac_ok:
        return ConditionReport("cooperative", PASS, consts, pair_witness, n_samples, plan.seed)
    witness = pair_witness if not pair_ok else worst_jac
    return ConditionReport("cooperative", FAIL, consts, witness, n_samples, plan.seed)


def _step_to_ball(U, delta, R):
    """Largest s in [0, 1] keeping ``|U + s*delta| <= R`` column-wise."""
    a = np.sum(delta * delta, axis=0)
    b = np.sum(U * delta, axis=0)
    c = np.sum(U * U, axis=0) - R * R
    with np.errstate(invalid="ignore", divide="ignore"):
        root = (-b + np.sqrt(np.maximum(b * b - a * c, 0.0))) / a
    root = np.where(a > 0, root, 1.0)
    # shave a few ulps so rounding cannot push v out of the ball
    return np.clip(root * (1 - 1e-12), 0.0, 1.0)


def check_positivity_compat(
    sys: ReactionSystem, plan: SamplePlan | None = None, x=None
) -> ConditionReport:
    """``h_i(t, x) - f_i(t, u) >= 0`` whenever ``u_i = 0`` and the others are >= 0."""
    plan = plan or SamplePlan()
    U0 = plan.points(sys.d, cone=True)
    x = np.zeros((1, 1)) if x is None else np.atleast_2d(x)
    worst, n = None, 0
    for t in plan.times:
        hmin = forcing_values(sys, t, x).min(axis=1)
        for i in range(sys.d):
            U = U0.copy()
            U[i] = 0.0
            margin = hmin[i] - eval_reaction(sys, t, U)[i]
            n += margin.size
            col = int(np.argmin(margin))
            if worst is None or margin[col] < worst.margin:
                worst = _witness(t, U, margin, col, component=i)
    verdict = FAIL if worst.margin < 0 else PASS
    return ConditionReport("positivity_compat", verdict, {}, worst, n, plan.seed)


def dominates(
    sys1: ReactionSystem, sys2: ReactionSystem, plan: SamplePlan | None = None, x=None
) -> ConditionReport:
    """``f1 >= f2`` componentwise and ``h1 <= h2`` on the samples."""
    if sys1.d != sys2.d:
        raise ValueError(f"dimension mismatch: {sys1.d} vs {sys2.d}")
    plan = plan or SamplePlan()
    cone = plan.positive_cone
    if cone is None:
        cone = sys1.positive_cone or sys2.positive_cone
    U = plan.points(sys1.d, cone)
    x = np.zeros((1, 1)) if x is None else np.atleast_2d(x)
    worst, n = None, 0
    for t in plan.times:
        diff = eval_reaction(sys1, t, U) - eval_reaction(sys2, t, U)
        comp = np.argmin(diff, axis=0)
        margin = diff[comp, np.arange(U.shape[1])]
        n += margin.size
        col = int(np.argmin(margin))
        if worst is None or margin[col] < worst.margin:
            worst = _witness(t, U, margin, col, component=int(comp[col]))
        hgap = forcing_values(sys2, t, x) - forcing_values(sys1, t, x)
        if hgap.size and hgap.min() < worst.margin:
            k, m = np.unravel_index(int(np.argmin(hgap)), hgap.shape)
            worst = Witness(t=float(t), u=tuple(float(v) for v in x[:, m]),
                            margin=float(hgap[k, m]), component=int(k))
    verdict = FAIL if worst.margin < 0 else PASS
    return ConditionReport("dominates", verdict, {"cone": cone}, worst, n, plan.seed,
                           note=f"{sys1.name} >= {sys2.name}")


# ---------------------------------------------------------------------------
# exponential change of variable


@dataclass(frozen=True, eq=False)
class ExpShift:
    """``v = exp(-beta t) u``, with the transformed system acting on ``v``."""

    system: ReactionSystem
    beta: float

    def to_u(self, t, v):
        return np.exp(self.beta * t) * np.asarray(v) if self.beta else np.asarray(v)

    def to_v(self, t, u):
        return np.exp(-self.beta * t) * np.asarray(u) if self.beta else np.asarray(u)


def exp_shift(sys: ReactionSystem, beta: float) -> ExpShift:
    """Return ``f~(t, v) = e^{-bt} f(t, e^{bt} v) + b v`` with forcing ``e^{-bt} h``."""
    beta = float(beta)
    if beta == 0.0:
        return ExpShift(sys, 0.0)
    f, jac, forcing = sys.f, sys.jac, sys.forcing

    def f_shift(t, v):
        g = np.exp(beta * t)
        return np.asarray(f(t, g * v)) / g + beta * v

    def jac_shift(t, v):
        v = np.asarray(v)
        J = jac(t, np.exp(beta * t) * v) if jac is not None else fd_jacobian(f, t, np.exp(beta * t) * v)
        J = np.array(J, dtype=float)
        for i in range(sys.d):
            J[i, i] += beta
        return J

    h_shift = None
    if forcing is not None:
        def h_shift(t, x):
            return np.exp(-beta * t) * np.asarray(forcing(t, x))

    if sys.sublinear:
        alpha = None if sys.alpha is None else sys.alpha + beta
        C2 = sys.C2
    else:
        # mixed-exponent case: alpha carries over, the additive constant must be refitted
        alpha, C2 = sys.alpha, None
    shifted = sys.replace(
        f=f_shift, jac=jac_shift, forcing=h_shift, alpha=alpha, C1=None, C2=C2,
        autonomous=False, name=f"{sys.name}~exp({beta:g}t)",
        meta={**sys.meta, "exp_shift_beta": beta},
    )
    return ExpShift(shifted, beta)


# ---------------------------------------------------------------------------
# growth exponents


def estimate_growth_exponents(sys: ReactionSystem, r_max: float = 1e3, n_points: int = 33,
                              t: float = 0.0) -> np.ndarray:
    """Log-log slope of ``|f_i(t, r e_i)|`` over ``[r_max/10, r_max]``, plus one.

    Components that vanish identically on their ray come back as NaN.
    """
    if r_max < 1e3:
        raise ValueError("rays must extend to radius >= 1e3")
    r = np.geomspace(r_max / 10, r_max, n_points)
    out = np.full(sys.d, np.nan)
    for i in range(sys.d):
        U = np.zeros((sys.d, r.size))
        U[i] = r
        fi = np.abs(eval_reaction(sys, t, U)[i])
        keep = fi > 0
        if keep.sum() < 2:
            continue
        slope = np.polyfit(np.log(r[keep]), np.log(fi[keep]), 1)[0]
        out[i] = slope + 1.0
    return out
