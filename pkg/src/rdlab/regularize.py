"""Smooth regularization of a reaction term.

Every transformer maps a :class:`ReactionSystem` to a :class:`RegularizedSystem`
that remembers its base system and the ordered list of stages applied:

* ``truncate``: blend ``f`` into a monotone power tail outside ``|u| <= k``;
* ``mollify``: convolve in ``u`` with a compactly supported bump;
* ``shift``: subtract a constant from every component;
* ``outer_blend``: glue two systems across the annulus ``n+1+g <= |u| <= n+2``.

``regularize_pipeline`` and ``comparison_pipeline`` assemble the standard
chains, including the data-driven choices of the mollification radius and of
the deviation bound ``delta``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import RegularizationError
from .reaction import ReactionSystem, SamplePlan, eval_reaction, jacobian
from .reports import FAIL, PASS_WITH_CONSTANT, ConditionReport, Witness

TAILS = ("plain", "affine", "mixed")


# ---------------------------------------------------------------------------
# cutoffs


@dataclass(frozen=True)
class CutoffProfile:
    """Equal to 1 on ``[0, inner]`` and 0 on ``[outer, inf)``, quintic smoothstep between."""

    inner: float
    outer: float

    def __post_init__(self):
        if not 0 <= self.inner < self.outer:
            raise RegularizationError(f"need 0 <= inner < outer, got {self.inner}, {self.outer}")

    def __call__(self, s):
        return smooth_cutoff(self, s)


def psi(k: float) -> CutoffProfile:
    return CutoffProfile(float(k), float(k) + 1.0)


def phi(n: float, gamma_bar: float = 0.5) -> CutoffProfile:
    if not 0 < gamma_bar < 1:
        raise RegularizationError(f"gamma_bar must lie in (0, 1), got {gamma_bar}")
    return CutoffProfile(n + 1.0 + gamma_bar, n + 2.0)


def smooth_cutoff(profile: CutoffProfile, s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise RegularizationError("cutoff argument must be non-negative")
    z = np.clip((s - profile.inner) / (profile.outer - profile.inner), 0.0, 1.0)
    return 1.0 - z**3 * (10.0 - 15.0 * z + 6.0 * z**2)


def _blend(weight, inner, outer):
    # exact on the plateau and beyond the outer radius, so no rounding leaks in
    with np.errstate(invalid="ignore", over="ignore"):
        mixed = weight * inner + (1.0 - weight) * outer
    return np.where(weight == 1.0, inner, np.where(weight == 0.0, outer, mixed))


# ---------------------------------------------------------------------------
# regularized systems


@dataclass(frozen=True, eq=False)
class RegularizedSystem(ReactionSystem):
    base: ReactionSystem | None = None
    stages: tuple = ()

    def describe(self) -> str:
        return " -> ".join([self.base.name if self.base else "?"] + [_stage_str(s) for s in self.stages])


def _stage_str(stage):
    name, params = stage
    return f"{name}(" + ", ".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}"
                                  for k, v in params.items()) + ")"


def as_regularized(sys: ReactionSystem) -> RegularizedSystem:
    if isinstance(sys, RegularizedSystem):
        return sys
    values = {f.name: getattr(sys, f.name) for f in dataclasses.fields(ReactionSystem)}
    return RegularizedSystem(**values, base=sys, stages=())


def _derive(sys: ReactionSystem, f, stage, **changes) -> RegularizedSystem:
    reg = as_regularized(sys)
    values = {fl.name: getattr(reg, fl.name) for fl in dataclasses.fields(ReactionSystem)}
    values.update(f=f, alpha=None, C1=None, C2=None, name=f"{reg.name}|{stage[0]}")
    values.update(changes)
    return RegularizedSystem(**values, base=reg.base, stages=reg.stages + (stage,))


def truncate(sys: ReactionSystem, k: float, tail: str = "plain", q=None) -> RegularizedSystem:
    """``psi_k(|u|) f + (1 - psi_k(|u|)) g`` with a power tail ``g``.

    ``plain``: ``g_i = |u_i|^{p_i-2} u_i``; ``affine`` adds ``f_i(t, 0)``;
    ``mixed`` also adds ``|u_i|^{q_i-2} u_i`` with ``2 <= q_i <= p_i``.
    """
    if k < 1:
        raise RegularizationError(f"truncation radius must be >= 1, got {k}")
    if tail not in TAILS:
        raise RegularizationError(f"unknown tail {tail!r}; expected one of {', '.join(TAILS)}")
    p = np.asarray(sys.exponents)
    qv = None
    if tail == "mixed":
        if q is None:
            raise RegularizationError("mixed tail needs exponents q")
        qv = np.broadcast_to(np.asarray(q, dtype=float), p.shape)
        if np.any(qv < 2) or np.any(qv > p):
            raise RegularizationError(f"mixed tail needs 2 <= q <= p, got q={qv}, p={p}")
    cutoff = psi(k)
    base_f = sys.f

    def g(t, u):
        extra = (None,) * (u.ndim - 1)
        pe = p[(slice(None),) + extra]
        out = np.abs(u) ** (pe - 2.0) * u
        if tail in ("affine", "mixed"):
            out = out + np.asarray(base_f(t, np.zeros_like(u)))
        if tail == "mixed":
            qe = qv[(slice(None),) + extra]
            out = out + np.abs(u) ** (qe - 2.0) * u
        return out

    def f_k(t, u):
        u = np.asarray(u, dtype=float)
        w = cutoff(np.linalg.norm(u, axis=0))
        with np.errstate(over="ignore", invalid="ignore"):
            fu = np.asarray(base_f(t, u), dtype=float)
        return _blend(w[None], fu, g(t, u))

    params = {"k": float(k), "tail": tail}
    if qv is not None:
        params["q"] = tuple(float(x) for x in qv)
    return _derive(sys, f_k, ("truncate", params), jac=None)


@dataclass(frozen=True)
class Mollifier:
    """Bump ``c exp(1 / ((|x|/eps)^2 - 1)) / eps^dim`` supported in the open ball."""

    epsilon: float
    dim: int
    norm_const: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        s2 = np.sum(x * x, axis=0) / self.epsilon**2
        inside = s2 < 1.0
        with np.errstate(divide="ignore", over="ignore"):
            val = np.exp(1.0 / np.where(inside, s2 - 1.0, -1.0))
        return np.where(inside, val, 0.0) / (self.norm_const * self.epsilon**self.dim)


def make_mollifier(epsilon: float, dim: int) -> Mollifier:
    if epsilon <= 0 or dim < 1:
        raise RegularizationError("need epsilon > 0 and dim >= 1")
    radial, _ = integrate.quad(lambda r: r ** (dim - 1) * math.exp(1.0 / (r * r - 1.0)),
                               0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)
    sphere = 2.0 * math.pi ** (dim / 2.0) / special.gamma(dim / 2.0)
    return Mollifier(float(epsilon), int(dim), float(sphere * radial))


def mollifier_quadrature(moll: Mollifier, order: int = 8):
    """Tensor Gauss-Legendre nodes ``(dim, M)`` and weights on ``[-eps, eps]^dim``.

    Nodes outside the ball are dropped; the weights ``w_j rho(s_j)`` are
    renormalized to sum to one so constants and linear maps are reproduced.
    """
    if order < 4:
        raise RegularizationError(f"quadrature order must be >= 4, got {order}")
    if moll.dim > 3:
        raise RegularizationError(f"mollification supports d <= 3, got d={moll.dim}")
    x, w = np.polynomial.legendre.leggauss(order)
    x, w = x * moll.epsilon, w * moll.epsilon
    grids = np.meshgrid(*([x] * moll.dim), indexing="ij")
    wgrids = np.meshgrid(*([w] * moll.dim), indexing="ij")
    nodes = np.vstack([g.ravel() for g in grids])
    weights = np.prod(np.vstack([g.ravel() for g in wgrids]), axis=0) * moll(nodes)
    keep = weights > 0
    nodes, weights = nodes[:, keep], weights[keep]
    return nodes, weights / weights.sum()


def mollify(sys: ReactionSystem, moll: Mollifier, quad_order: int = 8) -> RegularizedSystem:
    """Convolution in ``u`` with ``moll``; ``t`` is passed through."""
    if sys.d > 3:
        raise RegularizationError(f"mollification supports d <= 3, got d={sys.d}")
    if moll.dim != sys.d:
        raise RegularizationError(f"mollifier dimension {moll.dim} != system dimension {sys.d}")
    nodes, weights = mollifier_quadrature(moll, quad_order)
    base_f = sys.f

    def f_eps(t, u):
        u = np.asarray(u, dtype=float)
        shifted = u[..., None] - nodes.reshape((sys.d,) + (1,) * (u.ndim - 1) + (-1,))
        return np.asarray(base_f(t, shifted)) @ weights

    params = {"epsilon": moll.epsilon, "order": int(quad_order)}
    return _derive(sys, f_eps, ("mollify", params), jac=None)


def shift(sys: ReactionSystem, delta: float, multiplier: int = 1) -> RegularizedSystem:
    """``f - multiplier * delta`` in every component."""
    if delta < 0:
        raise RegularizationError(f"delta must be >= 0, got {delta}")
    if int(multiplier) != multiplier or multiplier < 0:
        raise RegularizationError(f"multiplier must be a natural number, got {multiplier}")
    offset = float(multiplier) * float(delta)
    base_f = sys.f

    def f_shift(t, u):
        return np.asarray(base_f(t, u)) - offset

    return _derive(sys, f_shift, ("shift", {"delta": float(delta), "multiplier": int(multiplier)}),
                   jac=sys.jac)


def outer_blend(inner: ReactionSystem, outer: ReactionSystem, n: float,
                gamma_bar: float = 0.5) -> RegularizedSystem:
    """``phi_n(|u|) inner + (1 - phi_n(|u|)) outer``."""
    if inner.d != outer.d:
        raise RegularizationError(f"dimension mismatch: {inner.d} vs {outer.d}")
    cutoff = phi(n, gamma_bar)
    fi, fo = inner.f, outer.f

    def f_blend(t, u):
        u = np.asarray(u, dtype=float)
        w = cutoff(np.linalg.norm(u, axis=0))
        return _blend(w[None], np.asarray(fi(t, u)), np.asarray(fo(t, u)))

    return _derive(inner, f_blend, ("outer_blend", {"n": float(n), "gamma_bar": float(gamma_bar)}),
                   jac=None)


# ---------------------------------------------------------------------------
# lattices, moduli and deviations


def lattice_points(d: int, radius: float, spacing: float, cone: bool = False) -> np.ndarray:
    """Cartesian lattice through the origin, clipped to the closed ball."""
    m = int(np.floor(radius / spacing + 1e-9))
    axis = spacing * np.arange(0 if cone else -m, m + 1)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    pts = np.vstack([g.ravel() for g in grids])
    return pts[:, np.linalg.norm(pts, axis=0) <= radius * (1 + 1e-12)]


def default_spacing(d: int, radius: float) -> float:
    return radius / {1: 1000, 2: 60, 3: 12}.get(d, 8)


def _chunked_max(fn, pts, chunk=4096):
    out = 0.0
    for start in range(0, pts.shape[1], chunk):
        block = pts[:, start:start + chunk]
        if block.size:
            out = max(out, float(np.max(fn(block))))
    return out


def sup_deviation(sys_a: ReactionSystem, sys_b: ReactionSystem, radius: float,
                  spacing: float | None = None, t: float = 0.0, cone: bool | None = None) -> float:
    """Max over a lattice in ``|u| <= radius`` of ``max_i |a_i(t, u) - b_i(t, u)|``."""
    if sys_a.d != sys_b.d:
        raise RegularizationError(f"dimension mismatch: {sys_a.d} vs {sys_b.d}")
    if cone is None:
        cone = sys_a.positive_cone or sys_b.positive_cone
    spacing = default_spacing(sys_a.d, radius) if spacing is None else spacing
    pts = lattice_points(sys_a.d, radius, spacing, cone)
    return _chunked_max(
        lambda u: np.max(np.abs(eval_reaction(sys_a, t, u) - eval_reaction(sys_b, t, u)), axis=0), pts
    )


def _probe_directions(d):
    eye = np.eye(d)
    dirs = [eye, -eye]
    if d > 1:
        ones = np.ones((d, 1)) / np.sqrt(d)
        dirs += [ones, -ones]
    return np.hstack(dirs)


def sampled_modulus(sys: ReactionSystem, radius: float, epsilon: float, t: float = 0.0,
                    cone: bool = False, points_per_axis: int = 24) -> float:
    """Max of ``|f(u) - f(u + epsilon e)|`` over probe points ``|u| <= radius``.

    In 1D the probe spacing is ``epsilon / 2``; in higher dimension a fixed
    lattice with ``points_per_axis`` points is used.
    """
    if sys.d == 1:
        spacing = epsilon / 2
    else:
        spacing = (radius if cone else 2 * radius) / (points_per_axis - 1)
    pts = lattice_points(sys.d, radius, spacing, cone)
    dirs = _probe_directions(sys.d) * epsilon

    def block_mod(u):
        fu = eval_reaction(sys, t, u)
        worst = np.zeros(u.shape[1])
        for e in dirs.T:
            fv = eval_reaction(sys, t, u + e[:, None])
            worst = np.maximum(worst, np.max(np.abs(fu - fv), axis=0))
        return worst

    return _chunked_max(block_mod, pts, chunk=1 << 16)


def select_epsilon(sys_k: ReactionSystem, k: float, t: float = 0.0, cone: bool | None = None,
                   eps_min: float = 2.0**-40, points_per_axis: int = 24) -> float:
    """Largest ``2^-j`` whose sampled modulus on ``|u| <= k`` is at most ``1/k``."""
    cone = sys_k.positive_cone if cone is None else cone
    eps = 0.5
    while eps > eps_min:
        if sampled_modulus(sys_k, k, eps, t, cone, points_per_axis) <= 1.0 / k:
            return eps
        eps /= 2.0
    return eps


# ---------------------------------------------------------------------------
# fitted bounds


def check_aux_bounds(sys: ReactionSystem, pipeline_sys: ReactionSystem,
                     plan: SamplePlan | None = None, r_fit: float | None = None) -> ConditionReport:
    """Fit growth/dissipation/Jacobian constants of ``pipeline_sys`` on the sample plan.

    Reports ``gamma = min (f,u)/S`` over ``|u| >= r_fit``, ``D2_min`` (the
    smallest additive constant making ``(f,u) >= gamma S - D2`` hold),
    ``D2 = max(D2_min, C2 of sys)``, ``D1 = max sum|f|^q / (1 + S)`` and
    ``D3 = max(0, max -lambda_min(sym f_u))``.
    """
    plan = plan or SamplePlan()
    r_fit = plan.R0 if r_fit is None else r_fit
    U = plan.points(sys.d, plan.cone_for(sys))
    p = np.asarray(sys.exponents)[:, None]
    q = p / (p - 1.0)
    S = np.sum(np.abs(U) ** p, axis=0)
    outer = (np.linalg.norm(U, axis=0) >= r_fit) & (S > 0)
    gamma, D2_min, D1, D3 = np.inf, 0.0, 0.0, 0.0
    worst = None
    for t in plan.times:
        F = eval_reaction(pipeline_sys, t, U)
        P = np.sum(F * U, axis=0)
        gamma = min(gamma, float(np.min(P[outer] / S[outer])))
        D1 = max(D1, float(np.max(np.sum(np.abs(F) ** q, axis=0) / (1.0 + S))))
    for t in plan.times:
        P = np.sum(eval_reaction(pipeline_sys, t, U) * U, axis=0)
        gap = gamma * S - P
        D2_min = max(D2_min, float(np.max(gap)))
        if gamma <= 0:
            margin = P - 1e-12 * S
            col = int(np.argmin(margin))
            if worst is None or margin[col] < worst.margin:
                worst = Witness(float(t), tuple(float(x) for x in U[:, col]), float(margin[col]))
        J = jacobian(pipeline_sys, t, U)
        sym = 0.5 * (J + np.swapaxes(J, 0, 1))
        lam = np.linalg.eigvalsh(np.moveaxis(sym, -1, 0))[:, 0]
        D3 = max(D3, float(-lam.min()))
    C2 = sys.C2 if sys.C2 is not None else 0.0
    consts = {"D1": D1, "D2": max(D2_min, C2), "D2_min": D2_min, "gamma": gamma, "D3": D3}
    n = U.shape[1] * len(plan.times)
    if worst is not None and worst.margin < 0:
        return ConditionReport("aux_bounds", FAIL, consts, worst, n, plan.seed,
                               note="no positive dissipation constant")
    note = getattr(pipeline_sys, "describe", lambda: pipeline_sys.name)()
    return ConditionReport("aux_bounds", PASS_WITH_CONSTANT, consts, None, n, plan.seed, note=note)


def constants_stable(reports, keys=("D1", "D2", "gamma"), rel: float = 0.05) -> dict:
    """Relative spread ``(max - min) / max`` of each fitted constant across reports."""
    out = {}
    for key in keys:
        vals = np.array([r.constants[key] for r in reports], dtype=float)
        top = np.max(np.abs(vals))
        spread = 0.0 if top == 0 else float((vals.max() - vals.min()) / top)
        out[key] = (spread, spread < rel)
    return out


# ---------------------------------------------------------------------------
# pipelines


@dataclass(frozen=True, eq=False)
class Pipeline:
    system: RegularizedSystem
    truncated: RegularizedSystem
    k: float
    epsilon: float


def regularize_pipeline(sys: ReactionSystem, k: float, tail: str = "plain", q=None,
                        quad_order: int = 8) -> Pipeline:
    """Truncate at ``k`` then mollify with the selected ``epsilon_k``."""
    f_k = truncate(sys, k, tail, q)
    eps = select_epsilon(f_k, k)
    return Pipeline(mollify(f_k, make_mollifier(eps, sys.d), quad_order), f_k, k, eps)


@dataclass(frozen=True, eq=False)
class ComparisonPipeline:
    """The blended pair ``l1 >= l2`` together with its tails and constants."""

    l1: RegularizedSystem
    l2: RegularizedSystem
    b1: RegularizedSystem
    b2: RegularizedSystem
    delta: float
    epsilon: float
    n: float
    k: float
    gamma_bar: float


def comparison_pipeline(sys1: ReactionSystem, sys2: ReactionSystem, n: float, k: float,
                        gamma_bar: float = 0.5, quad_order: int = 8,
                        shift_multipliers: tuple[int, int] = (1, 3),
                        delta_safety: float = 1.1) -> ComparisonPipeline:
    """Build ``l_j = phi_n F_j + (1 - phi_n) b_j`` for a dominating pair ``sys1 >= sys2``.

    ``b1`` is the mixed-tail truncation of ``sys1`` with ``q = p(sys2)``, ``b2``
    the affine-tail truncation of ``sys2``. Both are mollified with the smaller
    of their selected radii, ``delta`` bounds the mollification error on
    ``|u| <= n + 2`` and ``F_j`` subtracts ``shift_multipliers[j] * delta``.
    For ``d >= 2`` the lattice sup is inflated by ``delta_safety``.
    """
    if sys1.d != sys2.d:
        raise RegularizationError(f"dimension mismatch: {sys1.d} vs {sys2.d}")
    b1 = truncate(sys1, n, "mixed", q=sys2.exponents)
    b2 = truncate(sys2, n, "affine")
    eps = min(select_epsilon(b1, k), select_epsilon(b2, k))
    moll = make_mollifier(eps, sys1.d)
    m1, m2 = mollify(b1, moll, quad_order), mollify(b2, moll, quad_order)
    cone = sys1.positive_cone or sys2.positive_cone
    radius = n + 2.0
    spacing = eps / 2 if sys1.d == 1 else default_spacing(sys1.d, radius)
    delta = max(sup_deviation(m1, b1, radius, spacing, cone=cone),
                sup_deviation(m2, b2, radius, spacing, cone=cone))
    if sys1.d > 1:
        delta *= delta_safety
    F1 = shift(m1, delta, shift_multipliers[0])
    F2 = shift(m2, delta, shift_multipliers[1])
    l1 = outer_blend(F1, b1, n, gamma_bar)
    l2 = outer_blend(F2, b2, n, gamma_bar)
    return ComparisonPipeline(l1, l2, b1, b2, delta, eps, float(n), float(k), gamma_bar)
