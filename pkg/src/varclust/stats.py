"""Mergeable sub-cluster summaries: count, center and sum of squared errors.

A summary never carries raw points. Two summaries combine exactly through
the Ward decomposition::

    sse(A u B) = sse(A) + sse(B) + n_A n_B / (n_A + n_B) * |c_A - c_B|^2

so the statistics gathered from every site are sufficient for the global
merge.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

SubClusterId = Tuple[int, int]

# relative slack allowed when removal cancels to a slightly negative sse
REMOVE_CLAMP_RTOL = 1e-9


class NumericalWarning(RuntimeWarning):
    """Raised (as a warning) when a result had to be clamped."""


def as_dataset(points) -> np.ndarray:
    """Coerce ``points`` to a finite 2-D float64 array of shape (N, d)."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise ValueError(f"expected a 2-D array of points, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("points contain NaN or infinite coordinates")
    return arr


def _frozen(vec) -> np.ndarray:
    arr = np.array(vec, dtype=np.float64, copy=True).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class SubClusterSummary:
    """Sufficient statistics of one cluster.

    ``sse`` is the unnormalised sum of squared deviations from ``center``;
    the per-point variance is available as :attr:`variance`.
    ``id`` is ``(site_index, local_index)``; aggregates reuse the smallest
    member id.
    """

    id: Optional[SubClusterId]
    count: int
    center: np.ndarray = field(repr=False)
    sse: float

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(self.center))
        object.__setattr__(self, "count", int(self.count))
        object.__setattr__(self, "sse", float(self.sse))
        if self.id is not None:
            object.__setattr__(self, "id", (int(self.id[0]), int(self.id[1])))
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if self.sse < 0 or not math.isfinite(self.sse):
            raise ValueError(f"sse must be finite and >= 0, got {self.sse}")
        if not np.all(np.isfinite(self.center)):
            raise ValueError("center contains non-finite values")
        if self.count == 1 and self.sse != 0.0:
            raise ValueError("a singleton summary must have sse == 0")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def variance(self) -> float:
        return self.sse / self.count

    def with_id(self, new_id: Optional[SubClusterId]) -> "SubClusterSummary":
        return SubClusterSummary(new_id, self.count, self.center, self.sse)

    def to_dict(self) -> dict:
        return {
            "id": None if self.id is None else list(self.id),
            "count": self.count,
            "center": [float(v) for v in self.center],
            "sse": self.sse,
        }


def _check_dims(a: SubClusterSummary, b: SubClusterSummary) -> None:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def squared_distance(u: np.ndarray, v: np.ndarray) -> float:
    diff = u - v
    return float(np.dot(diff, diff))


def euclidean(u: np.ndarray, v: np.ndarray) -> float:
    return math.sqrt(squared_distance(u, v))


def variance_increase(a: SubClusterSummary, b: SubClusterSummary) -> float:
    """SSE growth caused by pooling ``a`` and ``b`` (Ward's criterion)."""
    _check_dims(a, b)
    weight = (a.count * b.count) / (a.count + b.count)
    return weight * squared_distance(a.center, b.center)


def merge_stats(a: SubClusterSummary, b: SubClusterSummary) -> SubClusterSummary:
    """Exact summary of the union of two disjoint clusters."""
    _check_dims(a, b)
    if a.id is not None and a.id == b.id:
        raise ValueError(f"cannot merge a summary with itself (id {a.id})")
    count = a.count + b.count
    center = (a.count * a.center + b.count * b.center) / count
    sse = a.sse + b.sse + variance_increase(a, b)
    ids = [i for i in (a.id, b.id) if i is not None]
    return SubClusterSummary(min(ids) if ids else None, count, center, sse)


def remove_stats(
    whole: SubClusterSummary,
    part: SubClusterSummary,
    new_id: Optional[SubClusterId] = None,
) -> SubClusterSummary:
    """Inverse of :func:`merge_stats`: the summary of ``whole`` minus ``part``.

    Cancellation can leave a tiny negative sse; anything within
    ``REMOVE_CLAMP_RTOL * whole.sse`` is clamped to zero with a
    :class:`NumericalWarning`, larger negatives raise.
    """
    _check_dims(whole, part)
    if part.count >= whole.count:
        raise ValueError(
            f"cannot remove {part.count} points from a cluster of {whole.count}"
        )
    count = whole.count - part.count
    center = (whole.count * whole.center - part.count * part.center) / count
    rest = SubClusterSummary(None, count, center, 0.0)
    sse = whole.sse - part.sse - variance_increase(rest, part)
    if count == 1:
        sse = 0.0
    elif sse < 0.0:
        if -sse > REMOVE_CLAMP_RTOL * whole.sse:
            raise ValueError(
                f"removal produced sse {sse!r}; part was not contained in whole"
            )
        warnings.warn(f"clamped negative sse {sse!r} to 0", NumericalWarning, stacklevel=2)
        sse = 0.0
    return SubClusterSummary(whole.id if new_id is None else new_id, count, center, sse)


def summarize(points, id: Optional[SubClusterId] = None) -> SubClusterSummary:
    """Two-pass mean and SSE of a non-empty point set."""
    arr = as_dataset(points)
    if arr.shape[0] == 0:
        raise ValueError("cannot summarize an empty point set")
    center = arr.mean(axis=0)
    dev = arr - center
    sse = float(np.einsum("ij,ij->", dev, dev)) if arr.shape[0] > 1 else 0.0
    return SubClusterSummary(id, arr.shape[0], center, sse)


def fold(summaries: Iterable[SubClusterSummary]) -> SubClusterSummary:
    """Left fold of :func:`merge_stats` over a non-empty sequence."""
    it = iter(summaries)
    try:
        acc = next(it)
    except StopIteration:
        raise ValueError("cannot fold an empty sequence of summaries") from None
    for s in it:
        acc = merge_stats(acc, s)
    return acc


@dataclass(frozen=True, eq=False)
class GlobalCluster:
    """Logical union of sub-clusters, identified only by their ids."""

    members: Tuple[SubClusterId, ...]
    summary: SubClusterSummary
    border: Optional[Tuple[SubClusterId, ...]] = None

    def __post_init__(self):
        if not self.members:
            raise ValueError("a global cluster needs at least one member")
        if len(set(self.members)) != len(self.members):
            raise ValueError("duplicate member ids in global cluster")

    @property
    def center(self) -> np.ndarray:
        return self.summary.center

    def to_dict(self) -> dict:
        return {
            "members": [list(m) for m in self.members],
            "count": self.summary.count,
            "center": [float(v) for v in self.summary.center],
            "sse": self.summary.sse,
            "border": None if self.border is None else [list(m) for m in self.border],
        }


def total_sse(globals_: Sequence[GlobalCluster]) -> float:
    """Clustering criterion: the sum of every global cluster's SSE."""
    return math.fsum(g.summary.sse for g in globals_)
