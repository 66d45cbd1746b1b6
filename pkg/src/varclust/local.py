"""Per-site clustering producing sub-cluster summaries.

Two clusterers are provided, Lloyd's k-means and Zhang's k-harmonic means
(KHM_p). Both start from D^2 (k-means++) seeding drawn from the config seed,
and both finish with a hard nearest-center assignment from which the
summaries are built.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .stats import SubClusterSummary, as_dataset, summarize

KHM_DISTANCE_FLOOR = 1e-12


class Algorithm(str, enum.Enum):
    KMEANS = "kmeans"
    KHARMONIC = "kharmonic"

    @classmethod
    def parse(cls, value) -> "Algorithm":
        if isinstance(value, cls):
            return value
        aliases = {"khm": "kharmonic", "k-means": "kmeans", "kharmonicmeans": "kharmonic"}
        value = str(value).lower()
        return cls(aliases.get(value, value))


@dataclass(frozen=True)
class LocalClusteringConfig:
    algorithm: Algorithm = Algorithm.KMEANS
    k: int = 10
    max_iterations: int = 100
    convergence_tol: float = 1e-6
    seed: int = 0
    khm_power: float = 3.5

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm.parse(self.algorithm))
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.convergence_tol < 0:
            raise ValueError("convergence_tol must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.algorithm is Algorithm.KHARMONIC and not self.khm_power > 2:
            raise ValueError("khm_power must be > 2 for k-harmonic means")

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm.value,
            "k": self.k,
            "max_iterations": self.max_iterations,
            "convergence_tol": self.convergence_tol,
            "seed": self.seed,
            "khm_power": self.khm_power,
        }


@dataclass
class LocalResult:
    assignment: np.ndarray
    summaries: List[SubClusterSummary]
    objective_trace: List[float] = field(default_factory=list)
    centers: Optional[np.ndarray] = None
    iterations: int = 0

    @property
    def k_effective(self) -> int:
        return len(self.summaries)


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def kmeans_plus_plus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """D^2 seeding. Falls back to uniform picks once every point is covered."""
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    closest = _sq_dists(points, points[chosen])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            remaining = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(remaining))
        chosen.append(idx)
        closest = np.minimum(closest, _sq_dists(points, points[idx : idx + 1])[:, 0])
    return points[chosen].copy()


def _check_inputs(points, cfg: LocalClusteringConfig) -> np.ndarray:
    arr = as_dataset(points)
    if arr.shape[0] == 0:
        raise ValueError("cannot cluster an empty dataset")
    if cfg.k > arr.shape[0]:
        raise ValueError(f"k={cfg.k} exceeds the number of points ({arr.shape[0]})")
    return arr


def _converged(prev: float, cur: float, tol: float) -> bool:
    return abs(prev - cur) <= tol * max(abs(prev), np.finfo(float).tiny)


def kmeans(points, cfg: LocalClusteringConfig, site_index: int = 0) -> LocalResult:
    """Lloyd's algorithm with farthest-point repair of emptied clusters."""
    X = _check_inputs(points, cfg)
    rng = np.random.default_rng(cfg.seed)
    centers = kmeans_plus_plus(X, cfg.k, rng)
    trace: List[float] = []
    prev_labels = None
    iterations = 0
    rows = np.arange(X.shape[0])
    for iterations in range(1, cfg.max_iterations + 1):
        d2 = _sq_dists(X, centers)
        labels = d2.argmin(axis=1)
        objective = float(d2[rows, labels].sum())
        trace.append(objective)
        if prev_labels is not None and (
            np.array_equal(labels, prev_labels)
            or _converged(trace[-2], objective, cfg.convergence_tol)
        ):
            break
        prev_labels = labels

        point_d2 = d2[rows, labels]
        for j in range(cfg.k):
            mask = labels == j
            if mask.any():
                centers[j] = X[mask].mean(axis=0)
            else:
                far = int(point_d2.argmax())
                centers[j] = X[far]
                point_d2[far] = 0.0
                prev_labels = None

    final = _sq_dists(X, centers).argmin(axis=1)
    summaries, dense = summarize_result(X, final, site_index, return_labels=True)
    return LocalResult(dense, summaries, trace, centers, iterations)


def _khm_weights(d: np.ndarray, p: float):
    """Stable KHM_p membership-weight products and per-point objective terms.

    ``d`` holds floored point-to-center distances. Distances are rescaled by
    each point's nearest distance so no power overflows.
    """
    dmin = d.min(axis=1, keepdims=True)
    ratio = dmin / d
    rp = ratio**p
    denom = rp.sum(axis=1, keepdims=True)
    # q_il = d_il^-(p+2) / (sum_j d_ij^-p)^2
    q = dmin ** (p - 2) * ratio ** (p + 2) / denom**2
    terms = d.shape[1] * dmin[:, 0] ** p / denom[:, 0]
    return q, terms


def kharmonic_means(
    points,
    cfg: LocalClusteringConfig,
    site_index: int = 0,
    init_centers=None,
) -> LocalResult:
    """K-harmonic means (KHM_p) with a hard nearest-center final assignment.

    ``init_centers`` overrides the D^2 seeding; the objective traced per
    iteration is ``sum_i k / sum_l |x_i - m_l|^-p``.
    """
    X = _check_inputs(points, cfg)
    if init_centers is not None:
        centers = np.array(init_centers, dtype=np.float64, copy=True)
        if centers.shape != (cfg.k, X.shape[1]):
            raise ValueError(f"init_centers must have shape {(cfg.k, X.shape[1])}")
    else:
        centers = kmeans_plus_plus(X, cfg.k, np.random.default_rng(cfg.seed))
    p = cfg.khm_power
    trace: List[float] = []
    iterations = 0
    for iterations in range(1, cfg.max_iterations + 1):
        d = np.maximum(np.sqrt(_sq_dists(X, centers)), KHM_DISTANCE_FLOOR)
        q, terms = _khm_weights(d, p)
        objective = float(terms.sum())
        done = bool(trace) and _converged(trace[-1], objective, cfg.convergence_tol)
        trace.append(objective)
        if done:
            break
        mass = q.sum(axis=0)
        live = mass > 0
        centers[live] = (q[:, live].T @ X) / mass[live, None]

    final = _sq_dists(X, centers).argmin(axis=1)
    summaries, dense = summarize_result(X, final, site_index, return_labels=True)
    return LocalResult(dense, summaries, trace, centers, iterations)


def cluster_local(points, cfg: LocalClusteringConfig, site_index: int = 0) -> LocalResult:
    if cfg.algorithm is Algorithm.KHARMONIC:
        return kharmonic_means(points, cfg, site_index)
    return kmeans(points, cfg, site_index)


def summarize_result(points, assignment: Sequence[int], site_index: int, return_labels=False):
    """One summary per non-empty label, re-indexed densely in label order."""
    X = as_dataset(points)
    labels = np.asarray(assignment)
    if labels.shape != (X.shape[0],):
        raise ValueError("assignment length must equal the number of points")
    present = np.unique(labels)
    dense = np.searchsorted(present, labels)
    summaries = [
        summarize(X[dense == j], id=(site_index, j)) for j in range(present.shape[0])
    ]
    if return_labels:
        return summaries, dense
    return summaries
