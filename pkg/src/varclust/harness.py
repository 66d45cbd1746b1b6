"""Multi-site simulation of the distributed clustering run.

Sites cluster their shards independently, ship (count, center, sse) per
sub-cluster to one merging site, and that site builds the global clusters.
Transport is simulated in-process; :class:`CommLedger` counts exactly what
would cross the wire.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .local import LocalClusteringConfig, LocalResult, cluster_local
from .merge import MergeConfig, MergeTrace, merge_all
from .stats import GlobalCluster, SubClusterId, SubClusterSummary, as_dataset, summarize, total_sse

log = logging.getLogger(__name__)


class PartitionStrategy(str, enum.Enum):
    RANDOM_UNIFORM = "random_uniform"
    CONTIGUOUS = "contiguous"


def derive_seed(seed: int, stream: int) -> int:
    """Independent 64-bit child seed for a numbered stream of a run seed."""
    state = np.random.SeedSequence([int(seed), int(stream)]).generate_state(1, np.uint64)
    return int(state[0])


def partition(
    dataset,
    s: int,
    strategy: PartitionStrategy | str = PartitionStrategy.RANDOM_UNIFORM,
    seed: int = 0,
) -> List[np.ndarray]:
    """Split row indices of ``dataset`` into ``s`` disjoint, covering shards."""
    n = as_dataset(dataset).shape[0]
    if s < 1:
        raise ValueError("site count must be >= 1")
    if s > n:
        raise ValueError(f"cannot spread {n} points over {s} sites")
    strategy = PartitionStrategy(strategy)
    if s == 1:
        return [np.arange(n)]
    if strategy is PartitionStrategy.CONTIGUOUS:
        return [np.asarray(chunk) for chunk in np.array_split(np.arange(n), s)]
    site_of = np.random.default_rng(seed).integers(s, size=n)
    return [np.flatnonzero(site_of == i) for i in range(s)]


@dataclass
class SiteState:
    site_index: int
    indices: np.ndarray
    points: np.ndarray
    local_result: Optional[LocalResult] = None


@dataclass(frozen=True)
class CommLedger:
    """Numbers each site sends to the merging site.

    ``per_site_numbers_sent`` counts d center coordinates, one count and one
    sse per emitted sub-cluster. The two-integer ids are tallied apart in
    ``per_site_id_numbers``. ``model_elements`` is the coarser
    ``3 * d * sum(k_i)`` figure over the configured k.
    """

    dim: int
    merging_site: int
    per_site_numbers_sent: Tuple[int, ...]
    per_site_id_numbers: Tuple[int, ...]
    model_elements: int

    @classmethod
    def from_sites(cls, dim: int, configured_k: Sequence[int], k_effective: Sequence[int], merging_site: int):
        return cls(
            dim=dim,
            merging_site=merging_site,
            per_site_numbers_sent=tuple((dim + 2) * k for k in k_effective),
            per_site_id_numbers=tuple(2 * k for k in k_effective),
            model_elements=3 * dim * sum(configured_k),
        )

    @property
    def total_numbers_sent(self) -> int:
        return sum(self.per_site_numbers_sent)

    @property
    def bytes_at_64bit(self) -> int:
        return 8 * self.total_numbers_sent

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "merging_site": self.merging_site,
            "per_site_numbers_sent": list(self.per_site_numbers_sent),
            "per_site_id_numbers": list(self.per_site_id_numbers),
            "total_numbers_sent": self.total_numbers_sent,
            "model_elements": self.model_elements,
            "bytes_at_64bit": self.bytes_at_64bit,
        }


@dataclass
class RunResult:
    global_clusters: List[GlobalCluster]
    global_label_map: Dict[SubClusterId, int]
    sites: List[SiteState]
    site_labels: List[np.ndarray]
    trace: MergeTrace
    ledger: CommLedger
    metrics: Dict[str, Optional[float]] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    @property
    def k_global(self) -> int:
        return len(self.global_clusters)

    @property
    def summaries(self) -> List[SubClusterSummary]:
        return [s for site in self.sites for s in site.local_result.summaries]

    def point_labels(self, n: Optional[int] = None) -> np.ndarray:
        """Global label of every dataset row, in original row order."""
        n = n if n is not None else sum(len(s.indices) for s in self.sites)
        labels = np.full(n, -1, dtype=np.int64)
        for site, lab in zip(self.sites, self.site_labels):
            labels[site.indices] = lab
        return labels

    def to_dict(self) -> dict:
        return {
            "k_global": self.k_global,
            "metrics": self.metrics,
            "ledger": self.ledger.to_dict(),
            "global_clusters": [g.to_dict() for g in self.global_clusters],
            "global_label_map": [
                {"site": sid[0], "local": sid[1], "global": gi}
                for sid, gi in sorted(self.global_label_map.items())
            ],
            "sites": [
                {
                    "site": s.site_index,
                    "points": int(len(s.indices)),
                    "k_effective": s.local_result.k_effective,
                    "local_iterations": s.local_result.iterations,
                    "summaries": [m.to_dict() for m in s.local_result.summaries],
                }
                for s in self.sites
            ],
            "trace": {
                "merges": len(self.trace.of_kind("merge")),
                "moves": len(self.trace.of_kind("move")),
                "rejects": len(self.trace.of_kind("reject")),
                "perturbation_passes": self.trace.perturbation_passes,
            },
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _gather_order(n_sites: int, merging_site: int) -> List[int]:
    # the merging site reads its own statistics first, then receives the rest
    return [(merging_site + i) % n_sites for i in range(n_sites)]


def run_pipeline(
    dataset,
    site_configs: Sequence[LocalClusteringConfig],
    merge_cfg: MergeConfig = MergeConfig(),
    seed: int = 0,
    *,
    strategy: PartitionStrategy | str = PartitionStrategy.RANDOM_UNIFORM,
    merging_site: int = 0,
    shards: Optional[Sequence[np.ndarray]] = None,
    truth=None,
    baseline: Optional[LocalClusteringConfig] = None,
) -> RunResult:
    """Partition, cluster locally, gather, merge, perturb and project labels.

    ``shards`` bypasses the seeded partition. ``truth`` (per-row ground
    truth labels) enables the ARI metric; ``baseline`` runs the same kind of
    clusterer centrally for an SSE comparison.
    """
    X = as_dataset(dataset)
    s = len(site_configs)
    if s < 1:
        raise ValueError("at least one site config is required")
    if not 0 <= merging_site < s:
        raise ValueError(f"merging_site must be in [0, {s})")
    if shards is None:
        shards = partition(X, s, strategy, seed)
    elif len(shards) != s:
        raise ValueError("one shard per site config is required")

    sites: List[SiteState] = []
    warnings: List[str] = []
    for i, (idx, cfg) in enumerate(zip(shards, site_configs)):
        idx = np.asarray(idx, dtype=np.int64)
        if len(idx) < cfg.k:
            raise ValueError(f"site {i} holds {len(idx)} points, fewer than k={cfg.k}")
        site = SiteState(i, idx, X[idx])
        site.local_result = cluster_local(site.points, cfg, site_index=i)
        if site.local_result.k_effective < cfg.k:
            msg = f"site {i}: k_effective {site.local_result.k_effective} < k {cfg.k}"
            log.warning(msg)
            warnings.append(msg)
        sites.append(site)

    gathered: List[SubClusterSummary] = []
    for i in _gather_order(s, merging_site):
        gathered.extend(sites[i].local_result.summaries)
    ledger = CommLedger.from_sites(
        X.shape[1],
        [c.k for c in site_configs],
        [site.local_result.k_effective for site in sites],
        merging_site,
    )

    globals_, trace = merge_all(gathered, merge_cfg)
    label_map = {m: gi for gi, g in enumerate(globals_) for m in g.members}
    site_labels = [
        np.array([label_map[(site.site_index, int(l))] for l in site.local_result.assignment], dtype=np.int64)
        for site in sites
    ]

    result = RunResult(globals_, label_map, sites, site_labels, trace, ledger, warnings=warnings)
    metrics: Dict[str, Optional[float]] = {
        "k_global": len(globals_),
        "total_sse": total_sse(globals_),
        "centralized_baseline_sse": None,
        "adjusted_rand_index": None,
    }
    if baseline is not None:
        _, metrics["centralized_baseline_sse"] = centralized_baseline(X, baseline)
    if truth is not None:
        metrics["adjusted_rand_index"] = adjusted_rand_index(truth, result.point_labels(X.shape[0]))
    result.metrics = metrics
    return result


def centralized_baseline(dataset, cfg: LocalClusteringConfig) -> Tuple[np.ndarray, float]:
    """Cluster the pooled dataset in one place; returns labels and SSE."""
    X = as_dataset(dataset)
    res = cluster_local(X, cfg, site_index=0)
    return res.assignment, math.fsum(s.sse for s in res.summaries)


def _comb2(x):
    return x * (x - 1) / 2.0


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Hubert-Arabie adjusted Rand index of two labelings of the same items."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("label arrays must be 1-D and of equal length")
    n = a.shape[0]
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1 if n else 0, bi.max() + 1 if n else 0), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    index = _comb2(table).sum()
    rows = _comb2(table.sum(axis=1)).sum()
    cols = _comb2(table.sum(axis=0)).sum()
    total = _comb2(n)
    expected = rows * cols / total if total else 0.0
    maximum = (rows + cols) / 2.0
    if maximum == expected:
        return 1.0
    return float((index - expected) / (maximum - expected))


def within_sse(dataset, labels) -> float:
    """Brute-force SSE of the partition induced by ``labels``."""
    X = as_dataset(dataset)
    labels = np.asarray(labels)
    return math.fsum(summarize(X[labels == g]).sse for g in np.unique(labels))
