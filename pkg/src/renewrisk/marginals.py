"""Univariate heavy-tailed laws used as claim marginals.

Every model exposes ``tail(x) = P[X > x]``, its generalized inverse
``quantile(q) = inf{x : tail(x) <= q}`` and inverse-transform ``sample``.
Sampling is keyed on the *tail level*: ``sample(u) = quantile(u)``, so a
uniform close to zero produces a large claim with no loss of precision.

``log_tail_at(log_x)`` evaluates ``log P[X > exp(log_x)]`` without forming
``exp(log_x)``; the class diagnostics use it to probe tails far beyond the
floating-point range.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "MarginalModel",
    "Pareto",
    "Lognormal",
    "WeibullHeavy",
    "PointMass",
    "LogPareto",
    "ExponentialTail",
    "tail",
    "quantile",
    "sample",
    "marginal_from_dict",
]


def _check_q(q):
    q = np.asarray(q, dtype=float)
    if np.any(~(q > 0) | (q > 1)):
        raise ValueError("quantile level must lie in (0, 1]")
    return q


def _positive(value, name):
    value = float(value)
    if not (np.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be finite and positive, got {value!r}")
    return value


class MarginalModel:
    kind: str = ""
    continuous: bool = True

    def tail(self, x):
        raise NotImplementedError

    def quantile(self, q):
        raise NotImplementedError

    def sample(self, u):
        return self.quantile(u)

    def log_tail_at(self, log_x):
        with np.errstate(divide="ignore", over="ignore"):
            return np.log(self.tail(np.exp(np.asarray(log_x, dtype=float))))

    @property
    def lower(self) -> float:
        """Lower end of the support."""
        return float(self.quantile(1.0))

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        d.update(dataclasses.asdict(self))
        return d


@dataclass(frozen=True)
class Pareto(MarginalModel):
    """``tail(x) = (x / scale)^(-alpha)`` for ``x >= scale``."""

    alpha: float
    scale: float = 1.0
    kind = "pareto"

    def __post_init__(self):
        object.__setattr__(self, "alpha", _positive(self.alpha, "alpha"))
        object.__setattr__(self, "scale", _positive(self.scale, "scale"))

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(x < self.scale, 1.0, (np.maximum(x, self.scale) / self.scale) ** -self.alpha)

    def quantile(self, q):
        return self.scale * _check_q(q) ** (-1.0 / self.alpha)

    def log_tail_at(self, log_x):
        log_x = np.asarray(log_x, dtype=float)
        return np.minimum(0.0, -self.alpha * (log_x - np.log(self.scale)))

    @property
    def mean(self):
        return np.inf if self.alpha <= 1 else self.alpha * self.scale / (self.alpha - 1)


@dataclass(frozen=True)
class Lognormal(MarginalModel):
    mu: float = 0.0
    sigma: float = 1.0
    kind = "lognormal"

    def __post_init__(self):
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "sigma", _positive(self.sigma, "sigma"))

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            z = (np.log(np.maximum(x, 0.0)) - self.mu) / self.sigma
        return np.where(x <= 0, 1.0, special.ndtr(-z))

    def quantile(self, q):
        # ndtri(q) -> -inf at q == 1, giving the support minimum 0.
        return np.exp(self.mu - self.sigma * special.ndtri(_check_q(q)))

    def log_tail_at(self, log_x):
        return special.log_ndtr(-(np.asarray(log_x, dtype=float) - self.mu) / self.sigma)


@dataclass(frozen=True)
class WeibullHeavy(MarginalModel):
    """Stretched exponential ``tail(x) = exp(-(x / scale)^beta)``, ``0 < beta < 1``."""

    beta: float
    scale: float = 1.0
    kind = "weibull_heavy"

    def __post_init__(self):
        beta = float(self.beta)
        if not 0 < beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {beta!r}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "scale", _positive(self.scale, "scale"))

    def tail(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return np.exp(-((x / self.scale) ** self.beta))

    def quantile(self, q):
        return self.scale * (-np.log(_check_q(q))) ** (1.0 / self.beta)

    def log_tail_at(self, log_x):
        with np.errstate(over="ignore"):
            return -np.exp(self.beta * (np.asarray(log_x, dtype=float) - np.log(self.scale)))


@dataclass(frozen=True)
class PointMass(MarginalModel):
    value: float
    kind = "point_mass"
    continuous = False

    def __post_init__(self):
        value = float(self.value)
        if not (np.isfinite(value) and value >= 0):
            raise ValueError(f"point mass must be finite and nonnegative, got {value!r}")
        object.__setattr__(self, "value", value)

    def tail(self, x):
        return np.where(np.asarray(x, dtype=float) < self.value, 1.0, 0.0)

    def quantile(self, q):
        return np.full(np.shape(_check_q(q)), self.value)[()]


@dataclass(frozen=True)
class LogPareto(MarginalModel):
    """``tail(x) = (1 + log(1 + x))^(-alpha)``: slowly varying, outside PD.

    Quantiles overflow to ``inf`` once ``q < (1 + log(1.8e308))^(-alpha)``
    (about 2e-6 for ``alpha = 2``); use ``log_tail_at`` for the far tail.
    """

    alpha: float
    kind = "log_pareto"

    def __post_init__(self):
        object.__setattr__(self, "alpha", _positive(self.alpha, "alpha"))

    def tail(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return (1.0 + np.log1p(x)) ** -self.alpha

    def quantile(self, q):
        with np.errstate(over="ignore"):
            return np.expm1(_check_q(q) ** (-1.0 / self.alpha) - 1.0)

    def log_tail_at(self, log_x):
        log1p_x = np.logaddexp(0.0, np.asarray(log_x, dtype=float))
        return -self.alpha * np.log1p(log1p_x)


@dataclass(frozen=True)
class ExponentialTail(MarginalModel):
    """Light-tailed reference law ``tail(x) = exp(-rate x)`` for the class diagnostics."""

    rate: float = 1.0
    kind = "exponential"

    def __post_init__(self):
        object.__setattr__(self, "rate", _positive(self.rate, "rate"))

    def tail(self, x):
        return np.exp(-self.rate * np.maximum(np.asarray(x, dtype=float), 0.0))

    def quantile(self, q):
        return -np.log(_check_q(q)) / self.rate

    def log_tail_at(self, log_x):
        with np.errstate(over="ignore"):
            return -self.rate * np.exp(np.asarray(log_x, dtype=float))


_KINDS = {cls.kind: cls for cls in (Pareto, Lognormal, WeibullHeavy, PointMass, LogPareto, ExponentialTail)}


def marginal_from_dict(spec: dict) -> MarginalModel:
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in _KINDS:
        raise ValueError(f"unknown marginal kind {kind!r}; expected one of {sorted(_KINDS)}")
    return _KINDS[kind](**spec)


def tail(m: MarginalModel, x):
    return m.tail(x)


def quantile(m: MarginalModel, q):
    return m.quantile(q)


def sample(m: MarginalModel, uniform):
    return m.sample(uniform)
