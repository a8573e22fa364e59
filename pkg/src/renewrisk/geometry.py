"""Rare sets, ruin sets and the scalarizing transform ``ya``.

A rare set ``A`` is open, increasing, has a convex complement and stays away
from the origin.  Every supported variant is described by a finite list of
nonnegative support directions, so that

    ya(x) = sup{u > 0 : x in u A} = max_p p . x

and ``x in tA`` holds exactly when ``ya(x) > t``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "RareSet",
    "HalfSpaceSum",
    "OrthantUnion",
    "DirectionList",
    "RuinSet",
    "contains",
    "ya",
    "ruin_to_rare",
    "rare_set_from_dict",
]


def _positive_tuple(values, name):
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError(f"{name} must be finite and strictly positive, got {arr.tolist()}")
    return tuple(float(v) for v in arr)


class RareSet:
    """Base class for the rare-set variants.

    Subclasses provide ``directions`` (one row per support direction); the
    generic methods below work for all of them.
    """

    kind: str = ""

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    @property
    def directions(self) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise ValueError(f"dimension mismatch: set has d={self.dim}, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("x must be finite")
        return x

    def score(self, x):
        """Positively homogeneous functional ``max_p p . x`` on all of R^d.

        Unlike :meth:`ya` this may be negative; ``x in A`` iff ``score(x) > 1``.
        """
        x = self._check(x)
        return self._score(x)

    def _score(self, x):
        return np.max(x @ self.directions.T, axis=-1)

    def ya(self, x):
        return np.maximum(self.score(x), 0.0)

    def contains(self, x):
        """Membership from the set's defining inequality (not from ``ya``)."""
        return self._contains(self._check(x))

    def _contains(self, x):
        return np.any(x @ self.directions.T > 1.0, axis=-1)

    def component_weights(self) -> np.ndarray:
        """Largest ``w_k`` with ``ya(x) >= w_k x_k`` for every nonnegative x."""
        return self.directions.max(axis=0)

    def to_dict(self) -> dict:  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class HalfSpaceSum(RareSet):
    """``{x : sum_i l_i x_i > u}``."""

    weights: tuple
    threshold: float = 1.0
    kind = "halfspace_sum"

    def __post_init__(self):
        object.__setattr__(self, "weights", _positive_tuple(self.weights, "weights"))
        (thr,) = _positive_tuple(self.threshold, "threshold")
        object.__setattr__(self, "threshold", thr)

    @property
    def directions(self):
        return np.asarray(self.weights)[None, :] / self.threshold

    def _score(self, x):
        return x @ np.asarray(self.weights) / self.threshold

    def _contains(self, x):
        return x @ np.asarray(self.weights) > self.threshold

    def to_dict(self):
        return {"kind": self.kind, "weights": list(self.weights), "threshold": self.threshold}


@dataclass(frozen=True)
class OrthantUnion(RareSet):
    """``{x : x_i > u_i for some i}``."""

    thresholds: tuple
    kind = "orthant_union"

    def __post_init__(self):
        object.__setattr__(self, "thresholds", _positive_tuple(self.thresholds, "thresholds"))

    @property
    def directions(self):
        return np.diag(1.0 / np.asarray(self.thresholds))

    def _score(self, x):
        return np.max(x / np.asarray(self.thresholds), axis=-1)

    def _contains(self, x):
        return np.any(x > np.asarray(self.thresholds), axis=-1)

    def to_dict(self):
        return {"kind": self.kind, "thresholds": list(self.thresholds)}


@dataclass(frozen=True)
class DirectionList(RareSet):
    """``{x : p . x > 1 for some p in directions}`` with nonnegative directions."""

    vectors: tuple
    kind = "direction_list"

    def __post_init__(self):
        arr = np.asarray(self.vectors, dtype=float)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValueError("directions must be a nonempty list of vectors")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("directions must be finite and nonnegative")
        if np.any(arr.max(axis=1) <= 0):
            raise ValueError("every direction needs a strictly positive entry")
        object.__setattr__(self, "vectors", tuple(tuple(float(v) for v in row) for row in arr))

    @property
    def directions(self):
        return np.asarray(self.vectors)

    def to_dict(self):
        return {"kind": self.kind, "directions": [list(v) for v in self.vectors]}


class RuinSet(Enum):
    """Scale-invariant ruin sets for the surplus vector."""

    ANY_LINE_NEGATIVE = "any_line_negative"
    SUM_NEGATIVE = "sum_negative"

    def contains(self, u):
        u = np.asarray(u, dtype=float)
        if self is RuinSet.ANY_LINE_NEGATIVE:
            return np.any(u < 0, axis=-1)
        return np.sum(u, axis=-1) < 0


def contains(rare_set: RareSet, x):
    """Membership of ``x`` in the open set; boundary points are outside."""
    return rare_set.contains(x)


def ya(rare_set: RareSet, x):
    """``sup{u > 0 : x in u A}`` with ``sup(empty) = 0``."""
    return rare_set.ya(x)


def ruin_to_rare(ruin_set: RuinSet, weights) -> RareSet:
    """Map a ruin set ``L`` and capital weights ``l`` to ``A = l - L``."""
    l = np.asarray(_positive_tuple(weights, "weights"))
    if abs(l.sum() - 1.0) > 1e-12:
        raise ValueError(f"capital weights must sum to 1, got {l.sum()!r}")
    ruin_set = RuinSet(ruin_set)
    if ruin_set is RuinSet.SUM_NEGATIVE:
        return HalfSpaceSum(np.ones_like(l), 1.0)
    return OrthantUnion(l)


def rare_set_from_dict(spec: dict) -> RareSet:
    kind = spec.get("kind")
    if kind == HalfSpaceSum.kind:
        return HalfSpaceSum(spec["weights"], spec.get("threshold", 1.0))
    if kind == OrthantUnion.kind:
        return OrthantUnion(spec["thresholds"])
    if kind == DirectionList.kind:
        return DirectionList(spec["directions"])
    raise ValueError(f"unknown set kind {kind!r}")
