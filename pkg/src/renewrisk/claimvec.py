"""Claim-vector models: dependence structures, samplers and ``Y_A`` tails.

All samplers are deterministic kernels of *tail-level* uniforms ``w`` with
``X_k = quantile_k(w_k)``.  The FGM and Gaussian copulas are radially
symmetric, so drawing ``w`` from the copula gives ``X`` that same copula.

The tail ``P[X in xA] = P[ya(X) > x]`` is available in three modes:

``asymptotic_leading``
    the single-big-jump leading term (sum of marginal tails for the
    asymptotically independent structures, the dominant marginal tail for
    comonotone vectors, Breiman's constant for a Pareto radial law);
``exact_quadrature``
    one-dimensional quadrature through the conditional copula, with grid
    halving until the relative change drops below ``rtol``;
``empirical``
    a Monte-Carlo estimate from ``n`` fresh claim draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import optimize, special

from ._quadrature import log_cells, refine
from .geometry import HalfSpaceSum, DirectionList, OrthantUnion, RareSet
from .marginals import MarginalModel, Pareto, PointMass, marginal_from_dict

__all__ = [
    "Independent",
    "FGM",
    "GaussianCopula",
    "Comonotone",
    "RotationalSimplex",
    "ClaimVectorModel",
    "TailFunctional",
    "sample_claim",
    "fa_tail",
    "weighted_sum_tail_check",
    "model_from_dict",
    "MODES",
]

MODES = ("asymptotic_leading", "exact_quadrature", "empirical")


@dataclass(frozen=True)
class Independent:
    kind = "independent"


@dataclass(frozen=True)
class FGM:
    """Farlie-Gumbel-Morgenstern copula (bivariate only).

    Its density ``1 + theta (1 - 2u)(1 - 2v)`` lies in ``[1 - |theta|, 1 + |theta|]``,
    so conditional laws are within a factor ``1 + |theta|`` of the marginals.
    """

    theta: float
    kind = "fgm"

    def __post_init__(self):
        if not -1 <= float(self.theta) <= 1:
            raise ValueError(f"FGM theta must lie in [-1, 1], got {self.theta!r}")
        object.__setattr__(self, "theta", float(self.theta))

    def density(self, u, v):
        return 1.0 + self.theta * (1 - 2 * np.asarray(u)) * (1 - 2 * np.asarray(v))


@dataclass(frozen=True)
class GaussianCopula:
    """Equicorrelated Gaussian copula."""

    rho: float
    kind = "gaussian"

    def __post_init__(self):
        if not -1 < float(self.rho) < 1:
            raise ValueError(f"Gaussian copula rho must lie in (-1, 1), got {self.rho!r}")
        object.__setattr__(self, "rho", float(self.rho))


@dataclass(frozen=True)
class Comonotone:
    kind = "comonotone"


@dataclass(frozen=True)
class RotationalSimplex:
    """``X = R * Theta`` with ``R ~ radial`` independent of a flat-Dirichlet ``Theta``."""

    radial: MarginalModel
    kind = "rotational_simplex"


_DEPENDENCE = {c.kind: c for c in (Independent, FGM, GaussianCopula, Comonotone, RotationalSimplex)}


def _conditional_cdf(dep, b, w):
    """``P[W2 <= b | W1 = w]`` for the bivariate copulas on tail levels."""
    if isinstance(dep, Independent):
        return b
    if isinstance(dep, FGM):
        return b + dep.theta * b * (1 - b) * (1 - 2 * w)
    if isinstance(dep, GaussianCopula):
        s = np.sqrt(1 - dep.rho**2)
        with np.errstate(invalid="ignore"):
            z = (special.ndtri(b) - dep.rho * special.ndtri(w)) / s
        return np.where(b >= 1, 1.0, np.where(b <= 0, 0.0, special.ndtr(z)))
    raise TypeError(f"no conditional copula for {dep!r}")


def _fgm_conditional_inverse(theta, w, v):
    a = theta * (1 - 2 * w)
    # root of a*t^2 - (1 + a)*t + v = 0 in [0, 1], written without cancellation
    return 2 * v / ((1 + a) + np.sqrt((1 + a) ** 2 - 4 * a * v))


@dataclass(frozen=True)
class ClaimVectorModel:
    """A claim-vector law with ``d`` nonnegative components.

    Parameters
    ----------
    marginals : sequence of MarginalModel
        One per component.  Ignored (may be empty) for ``RotationalSimplex``.
    dependence : dependence structure
        ``Independent()``, ``FGM(theta)``, ``GaussianCopula(rho)``,
        ``Comonotone()`` or ``RotationalSimplex(radial)``.
    dim : int, optional
        Required for ``RotationalSimplex``.
    """

    marginals: tuple = ()
    dependence: object = field(default_factory=Independent)
    dim: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "marginals", tuple(self.marginals))
        if isinstance(self.dependence, RotationalSimplex):
            if self.dim is None or int(self.dim) < 1:
                raise ValueError("RotationalSimplex needs an explicit dim >= 1")
            object.__setattr__(self, "dim", int(self.dim))
        else:
            if not self.marginals:
                raise ValueError("at least one marginal is required")
            if self.dim is not None and int(self.dim) != len(self.marginals):
                raise ValueError(f"dim={self.dim} does not match {len(self.marginals)} marginals")
            object.__setattr__(self, "dim", len(self.marginals))
        if isinstance(self.dependence, FGM) and self.dim != 2:
            raise ValueError("the FGM copula is implemented for d = 2 only")
        if self.dim > 8:
            raise ValueError("dimensions above 8 are not supported")

    @property
    def d(self) -> int:
        return self.dim

    @property
    def n_uniforms(self) -> int:
        return self.dim

    @cached_property
    def _gauss_chol(self):
        r = self.dependence.rho
        corr = np.full((self.dim, self.dim), r)
        np.fill_diagonal(corr, 1.0)
        return np.linalg.cholesky(corr)

    # -- sampling ---------------------------------------------------------

    def copula_levels(self, u, lead=0):
        """Map iid uniforms to dependent tail levels; column 0 drives ``lead``."""
        u = np.asarray(u, dtype=float)
        dep, d = self.dependence, self.dim
        order = [lead] + [k for k in range(d) if k != lead]
        w = np.empty_like(u)
        if isinstance(dep, Independent):
            w[..., order] = u
        elif isinstance(dep, Comonotone):
            w[...] = u[..., :1]
        elif isinstance(dep, FGM):
            w[..., order[0]] = u[..., 0]
            w[..., order[1]] = _fgm_conditional_inverse(dep.theta, u[..., 0], u[..., 1])
        elif isinstance(dep, GaussianCopula):
            with np.errstate(invalid="ignore"):
                z = special.ndtri(u) @ self._gauss_chol.T
            w[..., order] = special.ndtr(np.nan_to_num(z, nan=0.0))
        else:
            raise TypeError(f"no copula transform for {dep!r}")
        return w

    def sample(self, u, lead=0):
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.n_uniforms:
            raise ValueError(f"expected {self.n_uniforms} uniforms per claim, got {u.shape[-1]}")
        if isinstance(self.dependence, RotationalSimplex):
            radius = self.dependence.radial.quantile(u[..., 0])
            return radius[..., None] * self._simplex_direction(u[..., 1:])
        w = self.copula_levels(u, lead)
        x = np.empty_like(w)
        for k, m in enumerate(self.marginals):
            x[..., k] = m.quantile(w[..., k])
        return x

    @staticmethod
    def _simplex_direction(u):
        # spacings of sorted uniforms are flat-Dirichlet on the simplex
        s = np.sort(u, axis=-1)
        pad_lo = np.zeros(s.shape[:-1] + (1,))
        pad_hi = np.ones(s.shape[:-1] + (1,))
        return np.diff(np.concatenate([pad_lo, s, pad_hi], axis=-1), axis=-1)

    def rvs(self, n, rng):
        return self.sample(1.0 - rng.random((n, self.n_uniforms)))

    # -- importance-sampling hooks -----------------------------------------

    def _component_tails(self, rare_set, c):
        w = rare_set.component_weights()
        c = np.asarray(c, dtype=float)
        t = np.zeros(c.shape + (self.dim,))
        for k, m in enumerate(self.marginals):
            if w[k] > 0:
                t[..., k] = m.tail(c / w[k])
        return t, w

    def tail_proposal(self, rare_set, c, rng):
        """Draw claims tilted towards ``ya(X) > c`` (one threshold per row).

        Copula models: pick component ``k`` with probability proportional to
        ``P[w_k X_k > c]`` and draw its tail level below that probability.
        Rotational models: condition the radius given the direction.
        Rows where no component can exceed are drawn from the original law.
        """
        c = np.asarray(c, dtype=float)
        n = c.shape[0]
        u = 1.0 - rng.random((n, self.n_uniforms))
        if isinstance(self.dependence, RotationalSimplex):
            theta = self._simplex_direction(u[:, 1:])
            h = rare_set.ya(theta)
            with np.errstate(divide="ignore"):
                tr = np.where(h > 0, self.dependence.radial.tail(c / np.where(h > 0, h, 1.0)), 0.0)
            level = np.where(tr > 0, tr * u[:, 0], u[:, 0])
            return self.dependence.radial.quantile(level)[:, None] * theta
        t, _ = self._component_tails(rare_set, c)
        q = t.sum(axis=1)
        pick = rng.random(n)
        cum = np.cumsum(t, axis=1) / np.where(q > 0, q, 1.0)[:, None]
        lead = np.minimum((pick[:, None] >= cum).sum(axis=1), self.dim - 1)
        x = np.empty((n, self.dim))
        for k in range(self.dim):
            rows = lead == k
            if not rows.any():
                continue
            uk = u[rows].copy()
            tk = t[rows, k]
            uk[:, 0] = np.where(q[rows] > 0, tk * uk[:, 0], uk[:, 0])
            x[rows] = self.sample(uk, lead=k)
        return x

    def proposal_ratio(self, rare_set, x, c):
        """Density ratio proposal/original of :meth:`tail_proposal` at ``x``."""
        x = np.asarray(x, dtype=float)
        c = np.asarray(c, dtype=float)
        if isinstance(self.dependence, RotationalSimplex):
            radius = x.sum(axis=-1)
            with np.errstate(invalid="ignore", divide="ignore"):
                theta = np.where(radius[:, None] > 0, x / radius[:, None], 1.0 / self.dim)
                h = rare_set.ya(theta)
                tr = np.where(h > 0, self.dependence.radial.tail(c / np.where(h > 0, h, 1.0)), 0.0)
                r = np.where(radius * h > c, 1.0, 0.0) / np.where(tr > 0, tr, 1.0)
            return np.where(tr > 0, r, 1.0)
        t, w = self._component_tails(rare_set, c)
        q = t.sum(axis=1)
        with np.errstate(divide="ignore"):
            thresh = np.where(w > 0, c[:, None] / np.where(w > 0, w, 1.0), np.inf)
        hits = (x > thresh).sum(axis=1)
        return np.where(q > 0, hits / np.where(q > 0, q, 1.0), 1.0)

    # -- tails ---------------------------------------------------------------

    def leading_tail(self, rare_set, x):
        _check_dim(self, rare_set)
        x = np.asarray(x, dtype=float)
        dep = self.dependence
        if isinstance(dep, RotationalSimplex):
            if isinstance(dep.radial, Pareto):
                return _breiman_constant(self, rare_set, dep.radial.alpha) * dep.radial.tail(x)
            return self.exact_tail(rare_set, x)
        t, _ = self._component_tails(rare_set, x)
        if isinstance(dep, Comonotone):
            if _equal_marginals(self.marginals) and not isinstance(rare_set, OrthantUnion):
                return self.marginals[0].tail(x / float(rare_set.score(np.ones(self.dim))))
            return t.max(axis=-1)
        return t.sum(axis=-1)

    def exact_tail(self, rare_set, x, rtol=1e-4):
        _check_dim(self, rare_set)
        xs = np.asarray(x, dtype=float)
        out = np.array([self._exact_scalar(rare_set, float(v), rtol) for v in xs.ravel()])
        return out.reshape(xs.shape)[()]

    def _exact_scalar(self, rare_set, x, rtol):
        dep, d = self.dependence, self.dim
        if x <= 0:
            return 1.0
        if isinstance(dep, Comonotone):
            return _comonotone_tail(self, rare_set, x)
        if isinstance(dep, RotationalSimplex):
            if d == 1:
                return float(dep.radial.tail(x / rare_set.directions.max()))
            if d != 2:
                raise ValueError("exact_quadrature: mode unsupported for RotationalSimplex with d > 2")
            return _rotational_tail(self, rare_set, x, rtol)
        if isinstance(rare_set, OrthantUnion):
            return _orthant_tail(self, rare_set, x, rtol)
        dirs = rare_set.directions
        if dirs.shape[0] != 1:
            raise ValueError("exact_quadrature: mode unsupported for multi-direction sets")
        a = dirs[0]
        if d == 1:
            return float(self.marginals[0].tail(x / a[0]))
        if d != 2:
            raise ValueError("exact_quadrature: mode unsupported for d > 2 unless comonotone")
        return _halfspace_tail_2d(self, a, x, rtol)

    def empirical_tail(self, rare_set, x, n=10**6, seed=0):
        _check_dim(self, rare_set)
        y = np.sort(rare_set.ya(self.rvs(n, np.random.default_rng(seed))))
        x = np.asarray(x, dtype=float)
        return (1.0 - np.searchsorted(y, x, side="right") / n)[()]

    def to_dict(self):
        dep = self.dependence
        out = {"dependence": dep.kind}
        if isinstance(dep, FGM):
            out["theta"] = dep.theta
        elif isinstance(dep, GaussianCopula):
            out["rho"] = dep.rho
        if isinstance(dep, RotationalSimplex):
            out["dimension"] = self.dim
            out["radial"] = dep.radial.to_dict()
        else:
            out["marginals"] = [m.to_dict() for m in self.marginals]
        return out


def _check_dim(model, rare_set):
    if rare_set.dim != model.dim:
        raise ValueError(f"dimension mismatch: model d={model.dim}, set d={rare_set.dim}")


def _equal_marginals(ms):
    return all(m == ms[0] for m in ms)


def _breiman_constant(model, rare_set, alpha):
    # E[ya(Theta)^alpha] for the flat-Dirichlet direction
    d = model.dim
    if d == 1:
        return float(rare_set.ya(np.ones(1)) ** alpha)
    if d == 2:
        def rule(n):
            v = (np.arange(n) + 0.5) / n
            theta = np.stack([v, 1 - v], axis=1)
            return float(np.mean(rare_set.ya(theta) ** alpha))
        return refine(rule, n0=512, rtol=1e-8)[0]
    u = 1.0 - np.random.default_rng(12345).random((10**6, d - 1))
    return float(np.mean(rare_set.ya(model._simplex_direction(u)) ** alpha))


def _comonotone_tail(model, rare_set, x):
    ms = model.marginals
    if isinstance(rare_set, OrthantUnion):
        return float(max(m.tail(x * u) for m, u in zip(ms, rare_set.thresholds)))
    if _equal_marginals(ms):
        return float(ms[0].tail(x / float(rare_set.score(np.ones(model.dim)))))

    def h(log_w):
        w = np.exp(log_w)
        return float(rare_set.ya(np.array([m.quantile(w) for m in ms]))) - x

    lo = np.log(1e-300)
    if h(0.0) > 0:
        return 1.0
    if h(lo) <= 0:
        return 0.0
    return float(np.exp(optimize.brentq(h, lo, 0.0, xtol=1e-14, rtol=1e-14)))


def _halfspace_tail_2d(model, a, x, rtol):
    """P[a1 X1 + a2 X2 > x] through conditioning on the first tail level."""
    dep = model.dependence
    m1, m2 = model.marginals
    if a[0] == 0 or isinstance(m1, PointMass):
        shift = 0.0 if a[0] == 0 else a[0] * m1.value
        return float(m2.tail((x - shift) / a[1])) if a[1] > 0 else float(shift > x)
    if a[1] == 0 or isinstance(m2, PointMass):
        shift = 0.0 if a[1] == 0 else a[1] * m2.value
        return float(m1.tail((x - shift) / a[0]))
    g1 = float(m1.tail(x / a[0]))
    # Split at X1 = x / (2 a1).  Below the split, cells are log-spaced in the
    # tail level w1; above it, in the remainder y = x - a1 X1, which resolves
    # the boundary layer where X2 alone must exceed a small remainder.
    w_mid = float(m1.tail(0.5 * x / a[0]))

    def far(n):
        if w_mid >= 1.0:
            return 0.0
        edges, mids = log_cells(max(w_mid, 1e-300), 1.0, n)
        b = m2.tail((x - a[0] * m1.quantile(mids)) / a[1])
        return float(np.sum(_conditional_cdf(dep, b, mids) * np.diff(edges)))

    def near(n):
        y_edges = np.concatenate([[0.0], np.exp(np.linspace(np.log(x * 1e-12), np.log(0.5 * x), n + 1))])
        w_edges = m1.tail((x - y_edges) / a[0])
        y_mids = 0.5 * (y_edges[:-1] + y_edges[1:])
        w_mids = np.clip(m1.tail((x - y_mids) / a[0]), 1e-300, 1.0)
        b = m2.tail(y_mids / a[1])
        return float(np.sum(_conditional_cdf(dep, b, w_mids) * np.diff(w_edges)))

    def rule(n):
        return g1 + far(n) + near(n)

    return refine(rule, n0=512, rtol=rtol, atol=1e-300)[0]


def _orthant_tail(model, rare_set, x, rtol):
    dep = model.dependence
    g = np.array([float(m.tail(x * u)) for m, u in zip(model.marginals, rare_set.thresholds)])
    if isinstance(dep, Independent):
        with np.errstate(divide="ignore"):
            return float(-np.expm1(np.sum(np.log1p(-np.minimum(g, 1.0)))))
    if model.dim != 2:
        raise ValueError("exact_quadrature: mode unsupported for copula orthant sets with d != 2")
    g1, g2 = g
    if isinstance(dep, FGM):
        both = g1 * g2 * (1 + dep.theta * (1 - g1) * (1 - g2))
        return float(g1 + g2 - both)
    if g1 <= 0 or g2 <= 0:
        return float(g1 + g2)

    def rule(n):
        edges, mids = log_cells(g1 * 1e-14, g1, n)
        both = float(np.sum(_conditional_cdf(dep, g2, mids) * np.diff(edges)))
        return g1 + g2 - both

    return refine(rule, n0=512, rtol=rtol)[0]


def _rotational_tail(model, rare_set, x, rtol):
    radial = model.dependence.radial

    def rule(n):
        v = (np.arange(n) + 0.5) / n
        h = rare_set.ya(np.stack([v, 1 - v], axis=1))
        return float(np.mean(radial.tail(x / h)))

    return refine(rule, n0=512, rtol=rtol, atol=1e-300)[0]


@dataclass(frozen=True)
class TailFunctional:
    """``x -> P[X in xA]`` for a fixed model, set and evaluation mode."""

    model: ClaimVectorModel
    rare_set: RareSet
    mode: str = "exact_quadrature"
    n: int = 10**6
    seed: int = 0
    rtol: float = 1e-4

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown tail mode {self.mode!r}; expected one of {MODES}")
        _check_dim(self.model, self.rare_set)

    @cached_property
    def _sorted_ya(self):
        return np.sort(self.rare_set.ya(self.model.rvs(self.n, np.random.default_rng(self.seed))))

    def __call__(self, x):
        if self.mode == "asymptotic_leading":
            return np.minimum(self.model.leading_tail(self.rare_set, x), 1.0)[()]
        if self.mode == "exact_quadrature":
            return self.model.exact_tail(self.rare_set, x, self.rtol)
        x = np.asarray(x, dtype=float)
        return (1.0 - np.searchsorted(self._sorted_ya, x, side="right") / self.n)[()]


def sample_claim(model: ClaimVectorModel, uniforms):
    """Deterministic claim kernel; ``uniforms`` has ``d`` entries per claim."""
    return model.sample(uniforms)


def fa_tail(model: ClaimVectorModel, rare_set: RareSet, x, mode="asymptotic_leading", **kwargs):
    if np.any(np.asarray(x) <= 0):
        raise ValueError("x must be positive")
    return TailFunctional(model, rare_set, mode, **kwargs)(x)


def weighted_sum_tail_check(models: Sequence[ClaimVectorModel], weights, rare_set, x_grid,
                            n=10**6, seed=0, denominator="empirical"):
    """Compare ``P[sum c_i X_i in xA]`` with ``sum_i P[c_i X_i in xA]``.

    ``denominator="empirical"`` evaluates both sides on the same draws;
    ``"exact"`` uses quadrature for each summand.  Returns one row per x with
    keys ``x, numerator, stderr, denominator, ratio``.
    """
    models = list(models)
    c = np.asarray(weights, dtype=float)
    if len(models) != c.size:
        raise ValueError("one weight per model is required")
    if len(models) > 4:
        raise ValueError("at most 4 summands are supported")
    rng = np.random.default_rng(seed)
    draws = [m.rvs(n, rng) for m in models]
    total = rare_set.ya(sum(ci * xi for ci, xi in zip(c, draws)))
    parts = [rare_set.ya(ci * xi) for ci, xi in zip(c, draws)]
    rows = []
    for x in np.atleast_1d(np.asarray(x_grid, dtype=float)):
        p = float(np.mean(total > x))
        if denominator == "empirical":
            den = float(sum(np.mean(part > x) for part in parts))
        elif denominator == "exact":
            den = float(sum(m.exact_tail(rare_set, x / ci) for m, ci in zip(models, c)))
        else:
            raise ValueError(f"unknown denominator {denominator!r}")
        rows.append({
            "x": float(x),
            "numerator": p,
            "stderr": float(np.sqrt(p * (1 - p) / n)),
            "denominator": den,
            "ratio": p / den if den > 0 else np.nan,
        })
    return rows


def model_from_dict(spec: dict) -> ClaimVectorModel:
    spec = dict(spec)
    kind = spec.get("dependence", "independent")
    if kind not in _DEPENDENCE:
        raise ValueError(f"unknown dependence {kind!r}; expected one of {sorted(_DEPENDENCE)}")
    if kind == "fgm":
        dep = FGM(spec["theta"])
    elif kind == "gaussian":
        dep = GaussianCopula(spec["rho"])
    elif kind == "rotational_simplex":
        dep = RotationalSimplex(marginal_from_dict(spec["radial"]))
        return ClaimVectorModel((), dep, dim=spec["dimension"])
    else:
        dep = _DEPENDENCE[kind]()
    return ClaimVectorModel(tuple(marginal_from_dict(m) for m in spec["marginals"]), dep)
