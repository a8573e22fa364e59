"""Inter-arrival laws, arrival sampling and the renewal function.

``lambda(t) = E[N(t)]`` is closed-form for Poisson and deterministic
arrivals; otherwise the renewal equation

    lambda(t) = F(t) + int_0^t lambda(t - s) dF(s)

is discretized with trapezoid weights on a uniform grid, solved at step
``h`` and ``h/2``, and rejected unless the two solutions agree to 1e-3.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy import integrate

__all__ = [
    "InterArrivalModel",
    "Exponential",
    "ShiftedExponential",
    "Deterministic",
    "UniformShifted",
    "RenewalFunction",
    "RenewalError",
    "sample_arrivals",
    "renewal_function",
    "stieltjes_integral",
    "interarrival_from_dict",
]


class RenewalError(ArithmeticError):
    pass


class InterArrivalModel:
    kind = ""

    def quantile(self, u):
        """Inter-arrival time at tail level ``u`` (inverse transform)."""
        raise NotImplementedError

    def cdf(self, t):
        raise NotImplementedError

    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def lower_bound(self) -> float:
        """Essential infimum of the inter-arrival law (0 if none)."""
        return 0.0

    def to_dict(self):
        d = {"kind": self.kind}
        d.update(self.__dict__)
        return d


def _pos(v, name):
    v = float(v)
    if not (np.isfinite(v) and v > 0):
        raise ValueError(f"{name} must be finite and positive, got {v!r}")
    return v


@dataclass(frozen=True)
class Exponential(InterArrivalModel):
    rate: float
    kind = "exponential"

    def __post_init__(self):
        object.__setattr__(self, "rate", _pos(self.rate, "rate"))

    def quantile(self, u):
        return -np.log(u) / self.rate

    def cdf(self, t):
        return -np.expm1(-self.rate * np.maximum(np.asarray(t, dtype=float), 0.0))

    @property
    def mean(self):
        return 1.0 / self.rate


@dataclass(frozen=True)
class ShiftedExponential(InterArrivalModel):
    epsilon: float
    rate: float = 1.0
    kind = "shifted_exponential"

    def __post_init__(self):
        object.__setattr__(self, "epsilon", _pos(self.epsilon, "epsilon"))
        object.__setattr__(self, "rate", _pos(self.rate, "rate"))

    def quantile(self, u):
        return self.epsilon - np.log(u) / self.rate

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        return -np.expm1(-self.rate * np.maximum(t - self.epsilon, 0.0))

    @property
    def mean(self):
        return self.epsilon + 1.0 / self.rate

    @property
    def lower_bound(self):
        return self.epsilon


@dataclass(frozen=True)
class Deterministic(InterArrivalModel):
    c: float
    kind = "deterministic"

    def __post_init__(self):
        object.__setattr__(self, "c", _pos(self.c, "c"))

    def quantile(self, u):
        return np.full(np.shape(u), self.c)[()]

    def cdf(self, t):
        return np.where(np.asarray(t, dtype=float) >= self.c, 1.0, 0.0)

    @property
    def mean(self):
        return self.c

    @property
    def lower_bound(self):
        return self.c


@dataclass(frozen=True)
class UniformShifted(InterArrivalModel):
    a: float
    b: float
    kind = "uniform_shifted"

    def __post_init__(self):
        a, b = _pos(self.a, "a"), float(self.b)
        if not b > a:
            raise ValueError(f"need b > a, got a={a}, b={b}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def quantile(self, u):
        return self.b - np.asarray(u) * (self.b - self.a)

    def cdf(self, t):
        return np.clip((np.asarray(t, dtype=float) - self.a) / (self.b - self.a), 0.0, 1.0)

    @property
    def mean(self):
        return 0.5 * (self.a + self.b)

    @property
    def lower_bound(self):
        return self.a


_KINDS = {c.kind: c for c in (Exponential, ShiftedExponential, Deterministic, UniformShifted)}


def interarrival_from_dict(spec: dict) -> InterArrivalModel:
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in _KINDS:
        raise ValueError(f"unknown arrivals kind {kind!r}; expected one of {sorted(_KINDS)}")
    return _KINDS[kind](**spec)


def sample_arrivals(model: InterArrivalModel, t: float, uniforms) -> np.ndarray:
    """Arrival epochs in ``[0, t]`` from a generator or an iterable of tail-level uniforms.

    A finite iterable that runs out ends the path early.
    """
    if t < 0:
        raise ValueError("horizon must be nonnegative")
    if isinstance(uniforms, np.random.Generator):
        rng = uniforms
        stream: Iterable[float] = (1.0 - rng.random() for _ in itertools.count())
    else:
        stream = iter(uniforms)
    times = []
    now = 0.0
    if t == 0:
        return np.array(times)
    for u in stream:
        now += float(model.quantile(u))
        if now > t:
            break
        times.append(now)
    return np.array(times)


def sample_arrivals_bulk(model: InterArrivalModel, n: int, t: float, rng):
    """Arrival epochs of ``n`` independent paths truncated at ``t``.

    Returns ``(path_index, tau)`` sorted by path then time.
    """
    block = max(4, int(np.ceil(1.2 * t / model.mean + 4 * np.sqrt(t / model.mean + 1))))
    active = np.arange(n)
    offset = np.zeros(n)
    rows, taus = [], []
    while active.size:
        gaps = model.quantile(1.0 - rng.random((active.size, block)))
        cum = offset[:, None] + np.cumsum(gaps, axis=1)
        keep = cum <= t
        r, k = np.nonzero(keep)
        rows.append(active[r])
        taus.append(cum[r, k])
        more = keep[:, -1]
        offset = cum[more, -1]
        active = active[more]
    path = np.concatenate(rows) if rows else np.zeros(0, dtype=int)
    tau = np.concatenate(taus) if taus else np.zeros(0)
    order = np.argsort(path, kind="stable")
    return path[order], tau[order]


@dataclass(frozen=True)
class RenewalFunction:
    """Tabulated ``lambda(t)``; linear between grid points except for atoms."""

    grid: np.ndarray
    values: np.ndarray
    method: str
    h: float = 0.0
    est_err: float = 0.0
    rate: float | None = None
    atoms: np.ndarray | None = field(default=None)

    @property
    def t_max(self) -> float:
        return float(self.grid[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t > self.t_max * (1 + 1e-12)):
            raise ValueError(f"t beyond renewal grid (t_max={self.t_max})")
        if self.rate is not None:
            return self.rate * t
        if self.atoms is not None:
            return np.searchsorted(self.atoms, t, side="right").astype(float)[()]
        return np.interp(t, self.grid, self.values)


def renewal_function(model: InterArrivalModel, t_max: float, h: float | None = None,
                     tol: float = 1e-3) -> RenewalFunction:
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    if isinstance(model, Exponential):
        grid = np.linspace(0.0, t_max, 2001)
        return RenewalFunction(grid, model.rate * grid, "closed_form", rate=model.rate)
    if isinstance(model, Deterministic):
        atoms = model.c * np.arange(1, int(np.floor(t_max / model.c * (1 + 1e-12))) + 1)
        grid = np.concatenate([[0.0], atoms, [t_max]]) if atoms.size else np.array([0.0, t_max])
        grid = np.unique(grid)
        values = np.searchsorted(atoms, grid, side="right").astype(float)
        return RenewalFunction(grid, values, "closed_form", atoms=atoms)
    if h is None:
        h = min(model.mean / 50, t_max / 2000)
    if not (h > 0 and t_max >= h):
        raise ValueError("need h > 0 and t_max >= h")
    n = int(np.ceil(t_max / h))
    coarse = _solve_renewal(model, n, t_max / n)
    fine = _solve_renewal(model, 2 * n, t_max / (2 * n))
    scale = max(float(np.max(np.abs(fine))), 1e-300)
    gap = float(np.max(np.abs(fine[::2] - coarse))) / scale
    if gap >= tol:
        raise RenewalError(
            f"renewal equation did not converge: relative gap {gap:.3g} >= {tol} "
            f"between h={t_max / n:.4g} and h/2")
    grid = np.linspace(0.0, t_max, 2 * n + 1)
    return RenewalFunction(grid, fine, "renewal_equation", h=t_max / (2 * n), est_err=gap * scale)


def _solve_renewal(model, n, h):
    t = h * np.arange(n + 1)
    F = model.cdf(t)
    dF = np.diff(F)  # dF[k-1] = F(t_k) - F(t_{k-1})
    lam = np.zeros(n + 1)
    denom = 1.0 - 0.5 * dF[0]
    for i in range(1, n + 1):
        # trapezoid in the integrator: sum_k (lam[i-k] + lam[i-k+1]) / 2 * dF_k
        acc = F[i] + 0.5 * np.dot(lam[i - 1::-1][:i], dF[:i]) + 0.5 * np.dot(lam[i - 1:0:-1], dF[1:i])
        lam[i] = acc / denom
    return lam


def stieltjes_integral(g: Callable, rf: RenewalFunction, t: float, rtol: float = 1e-6) -> float:
    """``int_0^t g(s) lambda(ds)``."""
    if t > rf.t_max * (1 + 1e-12):
        raise ValueError(f"t={t} beyond renewal grid (t_max={rf.t_max})")
    if t <= 0:
        return 0.0
    if rf.rate is not None:
        val, _ = integrate.quad(lambda s: float(g(s)), 0.0, t, epsrel=rtol, epsabs=0.0, limit=200)
        return rf.rate * val
    if rf.atoms is not None:
        pts = rf.atoms[rf.atoms <= t * (1 + 1e-12)]
        return float(np.sum(g(pts))) if pts.size else 0.0
    k = int(np.searchsorted(rf.grid, t, side="right"))
    edges = np.append(rf.grid[:k], t) if rf.grid[k - 1] < t else rf.grid[:k]
    lam = rf(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    return float(np.sum(g(mids) * np.diff(lam)))
