"""Asymptotic right-hand side ``int_0^t P[X in x e^{rs} A] lambda(ds)``.

Infinite horizons are truncated at ``T*``.  When inter-arrival times have a
positive lower bound ``J`` the remaining mass is bounded by

    Fbar_A(x e^{rT}) * (lambda(T + 1) - lambda(T)) / (1 - e^{-rJ})

and ``T`` is doubled until that bound drops below ``1e-4`` of the value;
otherwise ``T`` is doubled until the integral changes by less than ``1e-4``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, interpolate, optimize

from .claimvec import TailFunctional
from .renewal import (
    Deterministic,
    Exponential,
    InterArrivalModel,
    RenewalFunction,
    renewal_function,
    stieltjes_integral,
)

__all__ = [
    "AsymptoticSpec",
    "RHSResult",
    "rhs_integral",
    "rhs_detail",
    "mrv_poisson_closed_form",
    "uniformity_profile",
    "x_for_level",
]

TRUNC_RTOL = 1e-4


@dataclass(frozen=True)
class RHSResult:
    value: float
    method: str
    trunc_T: float | None
    est_err: float


@dataclass(eq=False)
class AsymptoticSpec:
    """Inputs of the asymptotic integral.

    ``renewal`` is a Poisson rate (float), an inter-arrival model (the
    renewal function is then solved on demand) or a precomputed
    :class:`RenewalFunction`.
    """

    tail: Callable
    renewal: object
    r: float = 0.0
    _rf_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("interest force must be nonnegative")
        if isinstance(self.renewal, InterArrivalModel) and isinstance(self.renewal, Exponential):
            self.renewal = float(self.renewal.rate)
        if isinstance(self.renewal, (int, float)):
            if not self.renewal > 0:
                raise ValueError("Poisson rate must be positive")
            self.renewal = float(self.renewal)

    @property
    def poisson_rate(self):
        if isinstance(self.renewal, float):
            return self.renewal
        if isinstance(self.renewal, RenewalFunction) and self.renewal.rate is not None:
            return self.renewal.rate
        return None

    @property
    def lower_bound(self) -> float:
        if isinstance(self.renewal, InterArrivalModel):
            return self.renewal.lower_bound
        return 0.0

    def check_horizon(self, t):
        if isinstance(self.renewal, InterArrivalModel) and not np.isinf(t):
            if not self.renewal.cdf(t) > 0:
                raise ValueError(f"t={t} lies below the support of the first arrival")
        if t <= 0:
            raise ValueError("t must be positive")

    def renewal_on(self, t_needed) -> RenewalFunction:
        if isinstance(self.renewal, RenewalFunction):
            if t_needed > self.renewal.t_max * (1 + 1e-12):
                raise ValueError(f"t={t_needed} beyond renewal grid (t_max={self.renewal.t_max})")
            return self.renewal
        if self.poisson_rate is not None:
            return RenewalFunction(np.array([0.0, np.inf]), np.array([0.0, np.inf]), "closed_form",
                                   rate=self.poisson_rate)
        model = self.renewal
        t_max = model.mean * 2.0 ** np.ceil(np.log2(max(t_needed / model.mean, 1.0)))
        if t_max not in self._rf_cache:
            self._rf_cache[t_max] = renewal_function(model, t_max)
        return self._rf_cache[t_max]


class _LogLogTable:
    """Cubic interpolation of an expensive positive tail in log-log scale."""

    def __init__(self, tail, lo, hi, per_efold=24):
        n = max(8, int(np.ceil(per_efold * np.log(hi / lo))) + 1)
        ly = np.linspace(np.log(lo), np.log(hi), n)
        v = np.asarray(tail(np.exp(ly)), dtype=float)
        self.positive = np.all(v > 0)
        if self.positive:
            self._f = interpolate.CubicSpline(ly, np.log(v))
        else:
            self._ly, self._v = ly, v

    def __call__(self, y):
        ly = np.log(np.asarray(y, dtype=float))
        if self.positive:
            return np.exp(self._f(ly))
        return np.interp(ly, self._ly, self._v)


def _integrand(spec, x, t_hi):
    tail = spec.tail
    if spec.r > 0 and isinstance(tail, TailFunctional) and tail.mode == "exact_quadrature":
        tail = _LogLogTable(tail, x, x * np.exp(spec.r * t_hi) * (1 + 1e-9))
    if spec.r == 0:
        return lambda s: np.broadcast_to(np.asarray(tail(x), dtype=float), np.shape(s))
    return lambda s: tail(x * np.exp(spec.r * np.asarray(s, dtype=float)))


def _finite(spec, x, t):
    g = _integrand(spec, x, t)
    rf = spec.renewal_on(t)
    if rf.rate is not None:
        val, err = integrate.quad(lambda s: float(g(s)), 0.0, t, epsrel=1e-6, epsabs=0.0, limit=400)
        return rf.rate * val, rf.rate * err, "closed_form_poisson"
    if rf.atoms is not None:
        return stieltjes_integral(g, rf, t), 0.0, "renewal_atoms"
    val = stieltjes_integral(g, rf, t)
    return val, float(g(0.0)) * rf.est_err, "renewal_equation"


def rhs_detail(spec: AsymptoticSpec, x: float, t: float) -> RHSResult:
    if not x > 0:
        raise ValueError("x must be positive")
    spec.check_horizon(t)
    if not np.isinf(t):
        val, err, method = _finite(spec, x, t)
        return RHSResult(val, method, None, err)
    if spec.r <= 0:
        raise ValueError("divergent horizon: t = inf requires r > 0")
    J = spec.lower_bound
    T = max(1.0 / spec.r, 4.0 * (J if J > 0 else 1.0))
    if J > 0 and spec.poisson_rate is None:
        for _ in range(40):
            acc, _, method = _finite(spec, x, T)
            rf = spec.renewal_on(T + 1.0)
            bound = float(spec.tail(x * np.exp(spec.r * T))) * float(rf(T + 1.0) - rf(T)) / (-np.expm1(-spec.r * J))
            if bound < TRUNC_RTOL * acc or acc == 0:
                return RHSResult(acc, method + "+geometric_bound", T, bound)
            T *= 2
        raise ArithmeticError("infinite-horizon truncation did not settle")
    prev, _, method = _finite(spec, x, T)
    for _ in range(40):
        cur, _, method = _finite(spec, x, 2 * T)
        T *= 2
        diff = abs(cur - prev)
        if diff < TRUNC_RTOL * abs(cur) or cur == 0:
            return RHSResult(cur, method + "+doubling", T, diff)
        prev = cur
    raise ArithmeticError("infinite-horizon truncation did not settle")


def rhs_integral(spec: AsymptoticSpec, x: float, t: float) -> float:
    return rhs_detail(spec, x, t).value


def mrv_poisson_closed_form(rate, alpha, r, muA, vbar_x):
    """``rate / (alpha r) * mu(A) * Vbar(x)``."""
    for name, v in (("rate", rate), ("alpha", alpha), ("r", r), ("muA", muA)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v!r}")
    return rate / (alpha * r) * muA * vbar_x


def uniformity_profile(spec: AsymptoticSpec, x_grid, t_grid):
    x_grid, t_grid = list(np.atleast_1d(x_grid)), list(np.atleast_1d(t_grid))
    if not x_grid or not t_grid:
        raise ValueError("grids must be nonempty")
    rows = []
    for x in x_grid:
        for t in t_grid:
            res = rhs_detail(spec, float(x), float(t))
            rows.append({"x": float(x), "t": float(t), "rhs": res.value, "method": res.method,
                         "trunc_T": res.trunc_T, "est_err": res.est_err})
    return rows


def x_for_level(spec: AsymptoticSpec, level: float, t: float, x0: float = 1.0) -> float:
    """Solve ``rhs_integral(spec, x, t) = level`` for ``x``."""
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")

    def f(log_x):
        v = rhs_integral(spec, float(np.exp(log_x)), t)
        return np.log(v) - np.log(level) if v > 0 else -np.inf

    lo = hi = np.log(x0)
    for _ in range(200):
        if f(hi) <= 0:
            break
        lo, hi = hi, hi + 1.0
    else:
        raise ArithmeticError("could not bracket the requested level")
    for _ in range(200):
        if f(lo) > 0:
            break
        lo -= 1.0
    else:
        raise ArithmeticError("level exceeds the integral at every x")
    return float(np.exp(optimize.brentq(f, lo, hi, xtol=1e-10, rtol=1e-12)))
