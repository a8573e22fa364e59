"""Grid-halving driver shared by the tail quadratures."""

from __future__ import annotations

import numpy as np


class QuadratureError(ArithmeticError):
    """Raised when grid refinement fails to reach the requested tolerance."""


def refine(rule, n0=256, rtol=1e-4, atol=0.0, max_levels=10):
    """Evaluate ``rule(n)`` on doubling ``n`` until successive values agree.

    Returns ``(value, error_estimate, n)`` where ``value`` is the finest
    evaluation and the error estimate is the last absolute change.
    """
    n = n0
    prev = rule(n)
    for _ in range(max_levels):
        n *= 2
        cur = rule(n)
        err = abs(cur - prev)
        if err <= max(rtol * abs(cur), atol):
            return cur, err, n
        prev = cur
    raise QuadratureError(f"no convergence after {max_levels} halvings: last change {err:.3g}, value {cur:.6g}")


def log_cells(lo, hi, n):
    """Cell edges geometric in ``[lo, hi]`` and their log-midpoints."""
    edges = np.exp(np.linspace(np.log(lo), np.log(hi), n + 1))
    mids = np.sqrt(edges[:-1] * edges[1:])
    return edges, mids
