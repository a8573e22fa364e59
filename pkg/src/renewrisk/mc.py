"""Monte-Carlo estimation of rare-set entrance and finite-time ruin.

Paths are simulated in fixed-size chunks.  Chunk ``i`` draws from a Philox
(counter-based) generator keyed on ``(seed, i)``, and chunk results are
merged in chunk order, so estimates are bit-identical for a given
``(seed, chunk_size)`` whatever the number of workers.

Ruin is checked at arrival epochs only.  Between arrivals ``D_r`` is constant
and the discounted premium income is nondecreasing, so ``D_r - P`` cannot
newly enter the increasing set ``xA`` there.

The importance sampler tilts one claim per path, chosen uniformly among the
``N(t)`` arrivals, towards ``ya(X) > x e^{r tau} / kappa``.  A defensive
fraction ``p0`` of paths is drawn from the original law, which keeps the
proposal's support equal to the target's and caps the weights at ``1/p0``.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .asymptotic import AsymptoticSpec, rhs_detail, x_for_level
from .claimvec import ClaimVectorModel, TailFunctional
from .geometry import RareSet, RuinSet, ruin_to_rare
from .renewal import InterArrivalModel, sample_arrivals, sample_arrivals_bulk

__all__ = [
    "Scenario",
    "EstimatorResult",
    "RatioTable",
    "simulate_discounted_claims",
    "surplus_at_epochs",
    "estimate_entrance",
    "estimate_entrance_grid",
    "estimate_entrance_is",
    "estimate_ruin",
    "estimate_ruin_grid",
    "ratio_table",
    "ratio_table_at_level",
]

DEFAULT_CHUNK = 2**16
KAPPA = 2.0
DEFENSIVE = 0.1


@dataclass(frozen=True)
class Scenario:
    claims: ClaimVectorModel
    arrivals: InterArrivalModel
    target: object
    r: float = 0.0
    premiums: tuple = ()
    premium_bounds: tuple = ()
    weights: tuple = ()
    horizons: tuple = ()
    x_values: tuple = ()
    tail_mode: str = "exact_quadrature"

    def __post_init__(self):
        d = self.claims.dim
        if not (np.isfinite(self.r) and self.r >= 0):
            raise ValueError("interest force r must be finite and nonnegative")
        prem = tuple(float(c) for c in self.premiums) or (0.0,) * d
        bounds = tuple(float(c) for c in self.premium_bounds) or tuple(max(c, 1.0) for c in prem)
        if len(prem) != d or len(bounds) != d:
            raise ValueError(f"need {d} premium rates and bounds")
        for c, C in zip(prem, bounds):
            if not (C > 0 and 0 <= c <= C):
                raise ValueError(f"premium rate {c} outside [0, {C}]")
        l = tuple(float(v) for v in self.weights) or (1.0 / d,) * d
        if len(l) != d:
            raise ValueError(f"need {d} capital weights")
        object.__setattr__(self, "premiums", prem)
        object.__setattr__(self, "premium_bounds", bounds)
        object.__setattr__(self, "weights", l)
        object.__setattr__(self, "horizons", tuple(float(t) for t in self.horizons))
        object.__setattr__(self, "x_values", tuple(float(x) for x in self.x_values))
        if isinstance(self.target, RuinSet):
            ruin_to_rare(self.target, l)  # validates the weights
        elif isinstance(self.target, RareSet):
            if self.target.dim != d:
                raise ValueError(f"target set has d={self.target.dim}, claims have d={d}")
        else:
            raise TypeError("target must be a RareSet or a RuinSet")

    @property
    def is_ruin(self) -> bool:
        return isinstance(self.target, RuinSet)

    @property
    def rare_set(self) -> RareSet:
        return ruin_to_rare(self.target, self.weights) if self.is_ruin else self.target

    def tail_functional(self) -> TailFunctional:
        return TailFunctional(self.claims, self.rare_set, self.tail_mode)

    def asymptotic_spec(self) -> AsymptoticSpec:
        return AsymptoticSpec(self.tail_functional(), self.arrivals, self.r)

    def discounted_premium(self, s):
        """``int_0^s e^{-rz} c dz`` per line; shape ``s.shape + (d,)``."""
        s = np.asarray(s, dtype=float)[..., None]
        c = np.asarray(self.premiums)
        if self.r == 0:
            return c * s
        return c * (-np.expm1(-self.r * s)) / self.r


@dataclass(frozen=True)
class EstimatorResult:
    estimate: float
    stderr: float
    n: int
    method: str
    ci95: tuple
    seed: int
    wall_time: float
    hits: int

    @property
    def zero_hit(self) -> bool:
        return self.hits == 0

    def to_dict(self):
        return {"estimate": self.estimate, "stderr": self.stderr, "n": self.n, "method": self.method,
                "ci95": list(self.ci95), "seed": self.seed, "wall_time": self.wall_time,
                "hits": self.hits, "zero_hit": self.zero_hit}


def _result(est, se, n, method, seed, t0, hits):
    est = float(min(max(est, 0.0), 1.0))
    se = float(se)
    ci = (max(0.0, est - 1.96 * se), min(1.0, est + 1.96 * se))
    return EstimatorResult(est, se, int(n), method, ci, seed, time.perf_counter() - t0, int(hits))


def _binomial(hits, n, seed, t0, method="crude"):
    p = hits / n
    return _result(p, np.sqrt(p * (1 - p) / n), n, method, seed, t0, hits)


# -- single-path kernels ----------------------------------------------------

def _single_path(scn, t, rng):
    if not np.isfinite(t):
        raise ValueError("t must be finite for path simulation")
    if isinstance(rng, tuple):
        arrival_u, claim_u = rng
        tau = sample_arrivals(scn.arrivals, t, arrival_u)
        claims = scn.claims.sample(np.asarray(claim_u, dtype=float).reshape(-1, scn.claims.n_uniforms)[:tau.size])
        if claims.shape[0] < tau.size:
            raise ValueError("not enough claim uniforms for the sampled arrivals")
    else:
        tau = sample_arrivals(scn.arrivals, t, rng)
        claims = scn.claims.rvs(tau.size, rng)
    return tau, claims


def simulate_discounted_claims(scn: Scenario, t: float, uniforms) -> np.ndarray:
    """``D_r(t) = sum_{tau_i <= t} X_i e^{-r tau_i}`` for one path.

    ``uniforms`` is a numpy Generator or a pair ``(arrival_uniforms, claim_uniforms)``.
    """
    tau, claims = _single_path(scn, t, uniforms)
    return (claims * np.exp(-scn.r * tau)[:, None]).sum(axis=0) if tau.size else np.zeros(scn.claims.dim)


def surplus_at_epochs(scn: Scenario, x: float, t: float, uniforms):
    """Arrival epochs, ``D_r``, ``P`` and the surplus ``U = x l + P - D_r`` there."""
    tau, claims = _single_path(scn, t, uniforms)
    D = np.cumsum(claims * np.exp(-scn.r * tau)[:, None], axis=0)
    P = scn.discounted_premium(tau)
    U = x * np.asarray(scn.weights) + P - D
    return tau, D, P, U


# -- chunked bulk simulation ------------------------------------------------

def _chunk_rng(seed, index):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def _chunks(n, chunk_size):
    full, rest = divmod(int(n), int(chunk_size))
    return [chunk_size] * full + ([rest] if rest else [])


def _run(fn, args, n, seed, chunk_size, workers):
    sizes = _chunks(n, chunk_size)
    jobs = [(fn, args, size, seed, i) for i, size in enumerate(sizes)]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_call, jobs))
    return [_call(job) for job in jobs]


def _call(job):
    fn, args, size, seed, index = job
    return fn(*args, size, _chunk_rng(seed, index))


def _paths(scn, n, t, rng):
    path, tau = sample_arrivals_bulk(scn.arrivals, n, t, rng)
    claims = scn.claims.rvs(path.size, rng)
    return path, tau, claims


def _per_path_sum(path, values, n):
    return np.stack([np.bincount(path, weights=values[:, k], minlength=n) for k in range(values.shape[1])], axis=1)


def _entrance_chunk(scn, xs, ts, n, rng):
    path, tau, claims = _paths(scn, n, max(ts), rng)
    disc = claims * np.exp(-scn.r * tau)[:, None]
    rare = scn.rare_set
    hits = np.zeros((len(ts), len(xs)), dtype=np.int64)
    for i, t in enumerate(ts):
        m = tau <= t
        y = rare.ya(_per_path_sum(path[m], disc[m], n))
        hits[i] = (y[:, None] > np.asarray(xs)[None, :]).sum(axis=0)
    return hits


def _ruin_chunk(scn, xs, ts, n, rng):
    path, tau, claims = _paths(scn, n, max(ts), rng)
    hits = np.zeros((len(ts), len(xs)), dtype=np.int64)
    if path.size == 0:
        return hits
    disc = claims * np.exp(-scn.r * tau)[:, None]
    csum = np.cumsum(disc, axis=0)
    first = np.r_[True, path[1:] != path[:-1]]
    start_idx = np.maximum.accumulate(np.where(first, np.arange(path.size), 0))
    D = csum - _offsets(csum, start_idx)
    score = scn.rare_set.score(D - scn.discounted_premium(tau))
    ts_arr = np.asarray(ts)
    for j, x in enumerate(xs):
        hit = score > x
        paths_hit, idx = np.unique(path[hit], return_index=True)
        first_ruin = tau[hit][idx]
        hits[:, j] = (first_ruin[None, :] <= ts_arr[:, None]).sum(axis=1)
    return hits


def _offsets(csum, start_idx):
    # cumulative sum just before each path's first arrival
    prev = np.vstack([np.zeros((1, csum.shape[1])), csum[:-1]])
    return prev[start_idx]


def _is_chunk(scn, x, t, kappa, p0, n, rng):
    model, rare = scn.claims, scn.rare_set
    path, tau = sample_arrivals_bulk(scn.arrivals, n, t, rng)
    claims = model.rvs(path.size, rng)
    counts = np.bincount(path, minlength=n)
    start = np.cumsum(counts) - counts
    c = x * np.exp(scn.r * tau) / kappa
    tilt = (rng.random(n) >= p0) & (counts > 0)
    pick = start[tilt] + np.floor(rng.random(int(tilt.sum())) * counts[tilt]).astype(np.int64)
    if pick.size:
        claims[pick] = model.tail_proposal(rare, c[pick], rng)
    ratio = model.proposal_ratio(rare, claims, c) if path.size else np.zeros(0)
    rsum = np.bincount(path, weights=ratio, minlength=n)
    w = np.where(counts > 0, 1.0 / (p0 + (1 - p0) * rsum / np.maximum(counts, 1)), 1.0)
    disc = claims * np.exp(-scn.r * tau)[:, None]
    ind = rare.ya(_per_path_sum(path, disc, n)) > x
    iw = np.where(ind, w, 0.0)
    return np.array([iw.sum(), (iw**2).sum(), float(ind.sum())])


# -- estimators ---------------------------------------------------------------

def _check_common(scn, xs, ts, n, t_inf_proxy):
    if np.any(np.asarray(xs) <= 0):
        raise ValueError("x must be positive")
    if n < 1000:
        raise ValueError("need n >= 1000 paths")
    out = []
    for t in ts:
        if np.isinf(t):
            if t_inf_proxy is None:
                raise ValueError("t = inf needs a finite truncation proxy (t_inf_proxy)")
            t = t_inf_proxy
        if not t > 0:
            raise ValueError("t must be positive")
        out.append(float(t))
    return out


def estimate_entrance_grid(scn: Scenario, xs, ts, n, seed, *, workers=1, chunk_size=DEFAULT_CHUNK,
                           t_inf_proxy=None):
    """Crude estimates of ``P[D_r(t) in xA]`` for every ``(t, x)`` on common paths.

    Returns a nested list indexed ``[t][x]`` of :class:`EstimatorResult`.
    """
    t0 = time.perf_counter()
    xs = [float(v) for v in np.atleast_1d(xs)]
    ts = _check_common(scn, xs, np.atleast_1d(ts), n, t_inf_proxy)
    hits = sum(_run(_entrance_chunk, (scn, xs, ts), n, seed, chunk_size, workers))
    return [[_binomial(int(h), n, seed, t0) for h in row] for row in hits]


def estimate_entrance(scn: Scenario, x, t, n, seed, **kw) -> EstimatorResult:
    return estimate_entrance_grid(scn, [x], [t], n, seed, **kw)[0][0]


def estimate_entrance_is(scn: Scenario, x, t, n, seed, *, kappa=KAPPA, defensive=DEFENSIVE,
                         workers=1, chunk_size=DEFAULT_CHUNK, t_inf_proxy=None) -> EstimatorResult:
    """Importance-sampled ``P[D_r(t) in xA]``; unbiased for any ``kappa > 0``."""
    if scn.is_ruin:
        raise ValueError("IS unsupported for ruin targets")
    if not all(hasattr(scn.claims, a) for a in ("tail_proposal", "proposal_ratio")):
        raise TypeError("IS unsupported: claim model has no conditional tail sampler")
    if not 0 < defensive < 1:
        raise ValueError("defensive fraction must lie in (0, 1)")
    t0 = time.perf_counter()
    (t,) = _check_common(scn, [x], [t], n, t_inf_proxy)
    s1, s2, hits = sum(_run(_is_chunk, (scn, float(x), t, kappa, defensive), n, seed, chunk_size, workers))
    est = s1 / n
    var = max(s2 / n - est**2, 0.0) * n / (n - 1)
    return _result(est, np.sqrt(var / n), n, "importance", seed, t0, hits)


def estimate_ruin_grid(scn: Scenario, xs, ts, n, seed, *, workers=1, chunk_size=DEFAULT_CHUNK,
                       t_inf_proxy=None):
    """Crude ``psi(x, t)`` on common paths, indexed ``[t][x]``."""
    if not scn.is_ruin:
        raise ValueError("ruin estimation needs a RuinSet target")
    t0 = time.perf_counter()
    xs = [float(v) for v in np.atleast_1d(xs)]
    ts = _check_common(scn, xs, np.atleast_1d(ts), n, t_inf_proxy)
    hits = sum(_run(_ruin_chunk, (scn, xs, ts), n, seed, chunk_size, workers))
    return [[_binomial(int(h), n, seed, t0) for h in row] for row in hits]


def estimate_ruin(scn: Scenario, x, t, n, seed, **kw) -> EstimatorResult:
    return estimate_ruin_grid(scn, [x], [t], n, seed, **kw)[0][0]


# -- ratio harness --------------------------------------------------------------

@dataclass
class RatioTable:
    rows: list
    uniformity: list = field(default_factory=list)

    def sup_deviation(self, x=None):
        if x is None:
            return max(u["sup_dev"] for u in self.uniformity)
        return next(u["sup_dev"] for u in self.uniformity if u["x"] == x)


def _row(x, t, res, rhs):
    ratio = res.estimate / rhs.value if rhs.value > 0 else np.nan
    lo, hi = (c / rhs.value if rhs.value > 0 else np.nan for c in res.ci95)
    return {"x": x, "t": t, "mc": res.estimate, "mc_stderr": res.stderr, "rhs": rhs.value,
            "ratio": ratio, "ratio_ci_lo": lo, "ratio_ci_hi": hi, "method": res.method,
            "n": res.n, "hits": res.hits, "trunc_T": rhs.trunc_T}


def _mc_cells(scn, cells, n, seed, method, t_proxy, **kw):
    """MC results for a list of ``(x, t_sim)`` cells."""
    if method == "importance":
        return [estimate_entrance_is(scn, x, t, n, seed, **kw) for x, t in cells]
    xs = sorted({x for x, _ in cells})
    ts = sorted({t for _, t in cells})
    grid = (estimate_ruin_grid if scn.is_ruin else estimate_entrance_grid)(scn, xs, ts, n, seed, **kw)
    return [grid[ts.index(t)][xs.index(x)] for x, t in cells]


def _assemble(scn, cells, n, seed, method, spec, **kw):
    rhs = [rhs_detail(spec, x, t) for x, t in cells]
    proxy = max((r.trunc_T for (_, t), r in zip(cells, rhs) if np.isinf(t)), default=None)
    sim_cells = [(x, proxy if np.isinf(t) else t) for x, t in cells]
    results = _mc_cells(scn, sim_cells, n, seed, method, proxy, **kw)
    return [_row(x, t, res, r) for (x, t), res, r in zip(cells, results, rhs)]


def _sup_rows(rows, key):
    groups = {}
    for row in rows:
        groups.setdefault(row[key], []).append(abs(row["ratio"] - 1))
    return [{key: k, "sup_dev": float(max(v))} for k, v in groups.items()]


def ratio_table(scn: Scenario, x_grid, t_grid, n, seed, method="crude", **kw) -> RatioTable:
    """MC / asymptotic ratios on an ``x`` by ``t`` grid plus ``sup_t |ratio - 1|`` per x.

    ``t = inf`` rows compare the infinite-horizon integral with MC at ``T*``.
    """
    x_grid = [float(v) for v in np.atleast_1d(x_grid)]
    t_grid = [float(v) for v in np.atleast_1d(t_grid)]
    if not x_grid or not t_grid:
        raise ValueError("grids must be nonempty")
    spec = scn.asymptotic_spec()
    cells = [(x, t) for x in x_grid for t in t_grid]
    rows = _assemble(scn, cells, n, seed, method, spec, **kw)
    return RatioTable(rows, _sup_rows(rows, "x"))


def ratio_table_at_level(scn: Scenario, level, t_grid, n, seed, method="crude", scale=1.0, **kw) -> RatioTable:
    """Like :func:`ratio_table` but with ``x_t = scale * x`` solving ``rhs(x, t) = level``."""
    spec = scn.asymptotic_spec()
    t_grid = [float(v) for v in np.atleast_1d(t_grid)]
    cells = [(scale * x_for_level(spec, level, t), t) for t in t_grid]
    rows = _assemble(scn, cells, n, seed, method, spec, **kw)
    for row in rows:
        row["level"] = level
        row["scale"] = scale
    return RatioTable(rows, [{"x": scale, "level": level, "sup_dev": float(max(abs(r["ratio"] - 1) for r in rows))}])
