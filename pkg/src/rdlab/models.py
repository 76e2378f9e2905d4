"""Application systems: Lotka-Volterra with its two comparison systems and
three scalar models.

All constructors return :class:`ReactionSystem` objects in the left-hand sign
convention, ``du/dt - D Lap u + f(t, u) = 0``. Fractional powers use
``max(u, 0)`` so a trajectory that dips below zero by rounding never yields
NaN. Declared constants ``alpha``/``C2`` come from completing the power in
``(f, u)`` on the positive cone; ``C1`` is left to the certifier.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .reaction import ReactionSystem


def _coeff(value, t, shape):
    v = value(t) if callable(value) else value
    return np.broadcast_to(np.asarray(v, dtype=float), shape)


@dataclass(frozen=True)
class LVParams:
    """Rates ``a`` (3,) and interaction matrix ``A`` (3, 3; diagonal unused).

    Either may be a callable of ``t``; the system is autonomous only when
    both are constants.
    """

    a: tuple | Callable = (1.0, 1.0, 1.0)
    A: tuple | Callable = ((0.0, 1.0, 1.0), (1.0, 0.0, 1.0), (1.0, 1.0, 0.0))
    D: tuple = (1.0, 1.0, 1.0)

    @property
    def autonomous(self) -> bool:
        return not (callable(self.a) or callable(self.A))

    def rates(self, t) -> np.ndarray:
        return _coeff(self.a, t, (3,))

    def interactions(self, t) -> np.ndarray:
        return _coeff(self.A, t, (3, 3))

    def validate(self, times=(0.0, 0.5, 1.0)):
        for t in times:
            a, A = self.rates(t), self.interactions(t)
            off = A[~np.eye(3, dtype=bool)]
            if np.any(a <= 0) or np.any(off <= 0):
                raise ValueError(f"LV coefficients must be positive (t={t})")
        if any(d <= 0 for d in self.D):
            raise ValueError("diffusion constants must be positive")
        return self

    @property
    def a_max(self) -> float:
        if not self.autonomous:
            raise ValueError("a_max is only defined for constant coefficients")
        return float(np.max(self.rates(0.0)))


def _others(i):
    return [j for j in range(3) if j != i]


def _lv_constants(a):
    # (f, u) >= sum u^3 - a u^2 >= sum u^3 / 2 - 16 a^3 / 27 on the cone
    return 0.5, float(16.0 / 27.0 * np.sum(np.asarray(a) ** 3))


def lotka_volterra(params: LVParams | None = None) -> ReactionSystem:
    """``f_i = -u_i (a_i - u_i - sum_{j != i} a_ij u_j)``.

    The subtraction order is fixed so that, in floating point, the result is
    never below the uncoupled logistic or linear comparison systems on the
    positive cone (rounding is monotone).
    """
    params = (params or LVParams()).validate()

    def f(t, u):
        a, A = params.rates(t), params.interactions(t)
        out = np.empty_like(u, dtype=float)
        for i in range(3):
            j, k = _others(i)
            out[i] = -u[i] * (a[i] - u[i] - A[i, j] * u[j] - A[i, k] * u[k])
        return out

    def jac(t, u):
        a, A = params.rates(t), params.interactions(t)
        J = np.empty((3, 3) + u.shape[1:])
        for i in range(3):
            j, k = _others(i)
            J[i, i] = -(a[i] - 2.0 * u[i] - A[i, j] * u[j] - A[i, k] * u[k])
            J[i, j] = A[i, j] * u[i]
            J[i, k] = A[i, k] * u[i]
        return J

    alpha, C2 = _lv_constants(params.rates(0.0)) if params.autonomous else (None, None)
    return ReactionSystem(
        d=3, f=f, jac=jac, diffusion=params.D, exponents=(3, 3, 3), alpha=alpha, C2=C2,
        positive_cone=True, autonomous=params.autonomous, name="lotka_volterra",
        meta={"params": params},
    )


def uncoupled_logistic(a=(1.0, 1.0, 1.0), D=(1.0, 1.0, 1.0)) -> ReactionSystem:
    """``f_i = -u_i (a_i - u_i)``: the cooperative comparison system for LV."""
    params = LVParams(a=a, A=np.ones((3, 3)), D=D).validate()

    def f(t, u):
        a_t = params.rates(t)
        out = np.empty_like(u, dtype=float)
        for i in range(3):
            out[i] = -u[i] * (a_t[i] - u[i])
        return out

    def jac(t, u):
        a_t = params.rates(t)
        J = np.zeros((3, 3) + u.shape[1:])
        for i in range(3):
            J[i, i] = 2.0 * u[i] - a_t[i]
        return J

    alpha, C2 = _lv_constants(params.rates(0.0)) if params.autonomous else (None, None)
    return ReactionSystem(
        d=3, f=f, jac=jac, diffusion=params.D, exponents=(3, 3, 3), alpha=alpha, C2=C2,
        positive_cone=True, autonomous=params.autonomous, name="uncoupled_logistic",
        meta={"params": params},
    )


def uncoupled_linear(a=(1.0, 1.0, 1.0), D=(1.0, 1.0, 1.0)) -> ReactionSystem:
    """``f_i = -a_i u_i``; sublinear growth with a negative dissipation constant."""
    params = LVParams(a=a, A=np.ones((3, 3)), D=D).validate()

    def f(t, u):
        a_t = params.rates(t)
        out = np.empty_like(u, dtype=float)
        for i in range(3):
            out[i] = -(a_t[i] * u[i])
        return out

    def jac(t, u):
        a_t = params.rates(t)
        J = np.zeros((3, 3) + u.shape[1:])
        for i in range(3):
            J[i, i] = -a_t[i]
        return J

    alpha = C1 = None
    if params.autonomous:
        a_max = params.a_max
        alpha, C1 = -a_max, a_max
    return ReactionSystem(
        d=3, f=f, jac=jac, diffusion=params.D, exponents=(2, 2, 2), alpha=alpha, C1=C1,
        C2=0.0, sublinear=True, positive_cone=True, autonomous=params.autonomous,
        name="uncoupled_linear", meta={"params": params},
    )


def _pos_pow(u, e):
    return np.maximum(u, 0.0) ** e


def _pos_pow_deriv(u, e):
    # left derivative at 0 for e < 1; the right one is infinite
    up = np.maximum(u, 0.0)
    safe = np.where(up > 0, up, 1.0)
    return np.where(up > 0, e * safe ** (e - 1.0), 0.0)


def autocatalysis(k_decay: float = 1.0, m: float = 0.5, r: float = 0.5, L: float = 1.0,
                  D: float = 1.0) -> ReactionSystem:
    """Isothermal autocatalysis, ``f(u) = (u - 1) u^m + k u^r`` with ``p = m + 2``."""
    if not (k_decay > 0 and 0 < m < 1 and 0 < r < 1):
        raise ValueError("need k > 0 and 0 < m, r < 1")

    def f(t, u):
        return (u - 1.0) * _pos_pow(u, m) + k_decay * _pos_pow(u, r)

    def jac(t, u):
        J = _pos_pow(u, m) + (u - 1.0) * _pos_pow_deriv(u, m) + k_decay * _pos_pow_deriv(u, r)
        return J[None]

    u_star = 2.0 * (m + 1.0) / (m + 2.0)
    return ReactionSystem(
        d=1, f=f, jac=jac, diffusion=(D,), exponents=(m + 2.0,), alpha=0.5,
        C2=u_star ** (m + 1.0) / (m + 2.0), positive_cone=True, name="autocatalysis",
        meta={"k": k_decay, "m": m, "r": r, "L": L},
    )


def generalized_logistic(q: float = 1.0, r: float = 1.0, L: float = 1.0,
                         D: float = 1.0) -> ReactionSystem:
    """``f(u) = (u^q - 1) u^r`` with ``p = r + q + 1``; ``q = r = 1`` is the classic logistic."""
    if not (q > 0 and r > 0 and r + q >= 1):
        raise ValueError("need q, r > 0 and q + r >= 1")
    p = r + q + 1.0

    def f(t, u):
        return (_pos_pow(u, q) - 1.0) * _pos_pow(u, r)

    def jac(t, u):
        J = _pos_pow_deriv(u, q) * _pos_pow(u, r) + (_pos_pow(u, q) - 1.0) * _pos_pow_deriv(u, r)
        return J[None]

    u_star = (2.0 * (r + 1.0) / p) ** (1.0 / q)
    return ReactionSystem(
        d=1, f=f, jac=jac, diffusion=(D,), exponents=(p,), alpha=0.5,
        C2=u_star ** (r + 1.0) * q / p, positive_cone=True, name="generalized_logistic",
        meta={"q": q, "r": r, "L": L},
    )


def scalar_polynomial(coeffs, p: float, D: float = 1.0, alpha=None, C2=None,
                      positive_cone: bool = False, name: str = "polynomial") -> ReactionSystem:
    """``f(u) = sum_j c_j u^j`` (ascending coefficients), scalar."""
    c = np.asarray(coeffs, dtype=float)
    dc = np.polynomial.polynomial.polyder(c) if c.size > 1 else np.zeros(1)

    def f(t, u):
        return np.polynomial.polynomial.polyval(u, c)

    def jac(t, u):
        return np.polynomial.polynomial.polyval(u, dc)[None] * np.ones_like(u)[None]

    return ReactionSystem(
        d=1, f=f, jac=jac, diffusion=(D,), exponents=(p,), alpha=alpha, C2=C2,
        positive_cone=positive_cone, name=name, meta={"coeffs": tuple(c)},
    )


def scalar_cubic(D: float = 1.0) -> ReactionSystem:
    """``f(u) = u^3 - u``: p = 4, and u^4 - u^2 >= u^4/2 - 1/2."""
    return scalar_polynomial((0.0, -1.0, 0.0, 1.0), p=4, D=D, alpha=0.5, C2=0.5, name="cubic")


def zero_reaction(d: int = 1, D=1.0) -> ReactionSystem:
    """Pure diffusion."""
    return ReactionSystem(
        d=d, f=lambda t, u: np.zeros_like(u, dtype=float),
        jac=lambda t, u: np.zeros((d, d) + np.shape(u)[1:]),
        diffusion=np.broadcast_to(D, (d,)), exponents=(2.0,) * d, alpha=0.0, C1=0.0, C2=0.0,
        sublinear=True, name="heat",
    )


MODEL_NAMES = ("heat", "lv", "logistic3", "linear3", "autocatalysis", "genlogistic", "cubic")


def build_model(name: str, params: dict) -> ReactionSystem:
    """Construct a named model from a flat parameter dict (config front end)."""
    params = dict(params)

    def take(key, default):
        return params.pop(key, default)

    def vec(key, default, n=3):
        return tuple(np.broadcast_to(np.asarray(take(key, default), dtype=float), (n,)))

    if name == "heat":
        d = int(take("d", 1))
        sys = zero_reaction(d, vec("D", 1.0, d))
    elif name == "lv":
        A = np.asarray(take("A", 1.0), dtype=float)
        A = np.broadcast_to(A, (3, 3)) if A.size in (1, 9) else _off_diag(A)
        sys = lotka_volterra(LVParams(a=vec("a", 1.0), A=tuple(map(tuple, A)), D=vec("D", 1.0)))
    elif name == "logistic3":
        sys = uncoupled_logistic(vec("a", 1.0), vec("D", 1.0))
    elif name == "linear3":
        sys = uncoupled_linear(vec("a", 1.0), vec("D", 1.0))
    elif name == "autocatalysis":
        sys = autocatalysis(float(take("k", 1.0)), float(take("m", 0.5)), float(take("r", 0.5)),
                            D=float(take("D", 1.0)))
    elif name == "genlogistic":
        sys = generalized_logistic(float(take("q", 1.0)), float(take("r", 1.0)),
                                   D=float(take("D", 1.0)))
    elif name == "cubic":
        sys = scalar_cubic(float(take("D", 1.0)))
    else:
        raise ValueError(f"unknown model {name!r}; expected one of {', '.join(MODEL_NAMES)}")
    if params:
        raise ValueError(f"unknown parameters for model {name}: {', '.join(sorted(params))}")
    return sys


def _off_diag(values):
    values = np.asarray(values, dtype=float)
    if values.size != 6:
        raise ValueError("interaction list needs 1, 6 or 9 entries")
    A = np.zeros((3, 3))
    A[~np.eye(3, dtype=bool)] = values
    return A
