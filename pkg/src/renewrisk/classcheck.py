"""Finite-grid diagnostics for univariate tail classes.

Class membership is a statement about limits, so every verdict here is a
surrogate computed on a finite grid; results carry the grid and a
``caveat`` field saying so.

A ``tail`` argument is either a :class:`~renewrisk.marginals.MarginalModel`
or any callable ``x -> P[Y > x]`` (for example a
:class:`~renewrisk.claimvec.TailFunctional`).  Marginal models are probed in
log-x space through ``log_tail_at``, which reaches far past the float range;
that matters for slowly varying tails, whose ratios only approach 1 at
astronomically large x.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._quadrature import QuadratureError, refine
from .marginals import MarginalModel

__all__ = [
    "CAVEAT",
    "ConvolutionResult",
    "LongTailResult",
    "PDResult",
    "MatuszewskaResult",
    "convolution_ratio",
    "long_tail_ratio",
    "pd_ratio",
    "matuszewska_lower",
    "QuadratureError",
]

CAVEAT = "limit surrogate: finite-grid evidence, not a proof of class membership"
PD_MARGIN = 1e-3
LONG_TAIL_TOL = 0.05
SUBEXP_TOL = 0.1
GRID_BOUND = 10.0
DEFAULT_LOG_X = np.linspace(0.0, 5000.0, 401)


def _log_tail(tail, log_x):
    log_x = np.asarray(log_x, dtype=float)
    if isinstance(tail, MarginalModel):
        return np.asarray(tail.log_tail_at(log_x), dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        return np.log(np.asarray(tail(np.exp(log_x)), dtype=float))


def _log_grid(x_grid, log_x_grid):
    if x_grid is not None and log_x_grid is not None:
        raise ValueError("give x_grid or log_x_grid, not both")
    if x_grid is not None:
        x = np.asarray(x_grid, dtype=float)
        if np.any(x <= 0):
            raise ValueError("x-grid must be positive")
        return np.log(x)
    return np.asarray(DEFAULT_LOG_X if log_x_grid is None else log_x_grid, dtype=float)


def _tail_fn(tail):
    return tail.tail if isinstance(tail, MarginalModel) else tail


# -- subexponentiality ----------------------------------------------------------

@dataclass(frozen=True)
class ConvolutionResult:
    x: np.ndarray
    ratio: np.ndarray
    est_err: np.ndarray
    verdict: str
    caveat: str = CAVEAT


def _self_convolution_tail(tail, x, rtol):
    """``P[Y1 + Y2 > x] = 2 int_[0, x/2] Fbar(x - s) dF(s) + Fbar(x/2)^2``."""
    f = _tail_fn(tail)
    half = 0.5 * x
    lo = half * 1e-9

    def rule(n):
        edges = np.concatenate([[0.0], np.exp(np.linspace(np.log(lo), np.log(half), n + 1))])
        mass = -np.diff(np.asarray(f(edges), dtype=float))
        mids = 0.5 * (edges[:-1] + edges[1:])
        return 2.0 * float(np.dot(f(x - mids), mass)) + float(f(half)) ** 2

    return refine(rule, n0=512, rtol=rtol, max_levels=12)


def convolution_ratio(tail, x_grid, rtol=1e-5) -> ConvolutionResult:
    """``Fbar^{2*}(x) / Fbar(x)`` per x; the subexponential limit is 2."""
    x = np.atleast_1d(np.asarray(x_grid, dtype=float))
    if x.size == 0 or np.any(x <= 0):
        raise ValueError("x-grid must be nonempty and positive")
    f = _tail_fn(tail)
    ratios, errs = [], []
    for xv in x:
        base = float(f(xv))
        if not base > 0:
            raise QuadratureError(f"tail vanishes at x={xv}; ratio undefined")
        val, err, _ = _self_convolution_tail(tail, xv, rtol)
        ratios.append(val / base)
        errs.append(err / base)
    ratio = np.array(ratios)
    verdict = "subexponential-like" if abs(ratio[-1] - 2.0) < SUBEXP_TOL else "not subexponential"
    return ConvolutionResult(x, ratio, np.array(errs), verdict)


# -- long tail ------------------------------------------------------------------

@dataclass(frozen=True)
class LongTailResult:
    x: np.ndarray
    a: float
    ratio: np.ndarray
    long_tailed: bool
    flag: str
    caveat: str = CAVEAT


def long_tail_ratio(tail, a, x_grid) -> LongTailResult:
    """``Fbar(x - a) / Fbar(x)``; long-tailed laws have ratio tending to 1."""
    if not a > 0:
        raise ValueError("shift a must be positive")
    x = np.atleast_1d(np.asarray(x_grid, dtype=float))
    if x.size == 0 or np.any(x <= a):
        raise ValueError("x-grid must be nonempty with x > a")
    ratio = np.exp(_log_tail(tail, np.log(x - a)) - _log_tail(tail, np.log(x)))
    ok = bool(abs(ratio[-1] - 1.0) < LONG_TAIL_TOL)
    return LongTailResult(x, float(a), ratio, ok, "long-tailed" if ok else "not long-tailed")


# -- positive decrease ----------------------------------------------------------

@dataclass(frozen=True)
class PDResult:
    log_x: np.ndarray
    v: float
    ratio: np.ndarray
    max_top: float
    verdict: str
    caveat: str = CAVEAT

    @property
    def x(self):
        with np.errstate(over="ignore"):
            return np.exp(self.log_x)


def _scaled_ratios(tail, v, log_x):
    """Log of ``Fbar(v x) / Fbar(x)`` at the grid points where ``Fbar(x) > 0``."""
    base = _log_tail(tail, log_x)
    keep = np.isfinite(base)
    lx = log_x[keep]
    with np.errstate(invalid="ignore"):
        lr = _log_tail(tail, lx + np.log(v)) - base[keep]
    return lx, np.minimum(lr, 0.0)


def _top_half(n):
    return slice(n // 2, None) if n > 1 else slice(None)


def pd_ratio(tail, v, x_grid=None, *, log_x_grid=None) -> PDResult:
    """``Fbar(v x) / Fbar(x)``; verdict PD when the top-half max is below ``1 - 1e-3``.

    Without a grid, ``log x`` runs over ``[0, 5000]``.
    """
    if not v > 1:
        raise ValueError("v must exceed 1")
    lx, lr = _scaled_ratios(tail, v, _log_grid(x_grid, log_x_grid))
    if lx.size == 0:
        raise ValueError("tail vanishes on the whole grid")
    ratio = np.exp(lr)
    top = float(ratio[_top_half(ratio.size)].max())
    return PDResult(lx, float(v), ratio, top, "PD" if top < 1 - PD_MARGIN else "not-PD")


# -- lower Matuszewska index ---------------------------------------------------------

@dataclass(frozen=True)
class MatuszewskaResult:
    estimate: float
    v_grid: np.ndarray
    fstar: np.ndarray
    at_grid_bound: bool
    caveat: str = CAVEAT
    notes: list = field(default_factory=list)

    @property
    def label(self):
        return f">= {GRID_BOUND:g} (grid bound)" if self.at_grid_bound else f"{self.estimate:.4g}"


def matuszewska_lower(tail, v_grid, x_grid=None, *, log_x_grid=None) -> MatuszewskaResult:
    """Least-squares slope through the origin of ``-log Fbar*(v)`` against ``log v``.

    ``Fbar*(v)`` is approximated by the max of ``Fbar(v x) / Fbar(x)`` over
    the top half of the x-grid.  Estimates above 10 are flagged as hitting
    the grid bound (the index may be infinite).
    """
    v = np.atleast_1d(np.asarray(v_grid, dtype=float))
    if v.size == 0 or np.any(v <= 1):
        raise ValueError("v-grid must be nonempty and inside (1, inf)")
    log_x = _log_grid(x_grid, log_x_grid)
    if log_x.size < 2:
        raise ValueError("x-grid needs at least two points")
    log_fstar = np.empty(v.size)
    for i, vi in enumerate(v):
        lx, lr = _scaled_ratios(tail, vi, log_x)
        if lx.size < 2:
            raise ValueError("tail vanishes on (almost) the whole grid")
        log_fstar[i] = np.nanmax(lr[_top_half(lr.size)])
    a = np.log(v)
    b = -log_fstar
    with np.errstate(invalid="ignore", over="ignore"):
        est = float(np.dot(a, b) / np.dot(a, a)) if np.all(np.isfinite(b)) else np.inf
    notes = [] if np.all(np.isfinite(b)) else ["Fbar*(v) underflows to 0 on part of the v-grid"]
    return MatuszewskaResult(est, v, np.exp(log_fstar), bool(est > GRID_BOUND), notes=notes)
