"""Experiment configuration, the two reference presets and output files.

A configuration is a plain JSON-compatible dict; :class:`ExperimentConfig`
validates it. Every seed not given explicitly is derived from the master
``seed``, so a single integer pins a whole run.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .data import (
    FeatureRecipe,
    GaussianMixtureSpec,
    derive_features,
    encode_labels,
    generate_mixture,
    load_csv,
    load_iris,
    write_csv,
)
from .harness import PartitionStrategy, RunResult, derive_seed, partition, run_pipeline
from .local import LocalClusteringConfig
from .merge import MergeConfig

# seed streams
_DATA_STREAM = 1
_PARTITION_STREAM = 2
_BASELINE_STREAM = 3
_SITE_STREAM = 100

PRESETS: Dict[str, Dict[str, Any]] = {
    # three equal-weight components, pairwise mean distance 12 >= 10 * max stddev
    "synthetic3": {
        "dataset": {
            "kind": "mixture",
            "total_points": 1150,
            "components": [
                {"weight": 1 / 3, "mean": [0.0, 0.0], "stddev": [1.0, 0.8]},
                {"weight": 1 / 3, "mean": [12.0, 0.0], "stddev": [0.7, 1.0]},
                {"weight": 1 / 3, "mean": [6.0, 10.392304845413264], "stddev": [1.0, 1.0]},
            ],
        },
        "sites": 3,
        "local": {"algorithm": "kmeans", "k": 10},
        "merge": {},
        "partition": "random_uniform",
        "features": "identity",
        "baseline": {"algorithm": "kmeans", "k": 3},
        "seed": 0,
    },
    "iris": {
        "dataset": {"kind": "iris"},
        "sites": 2,
        "local": {"algorithm": "kharmonic", "k": 5},
        "merge": {},
        "partition": "random_uniform",
        "features": "identity",
        "baseline": {"algorithm": "kharmonic", "k": 3},
        "seed": 0,
    },
}


def preset(name: str, seed: Optional[int] = None) -> Dict[str, Any]:
    try:
        raw = copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    if seed is not None:
        raw["seed"] = int(seed)
    return raw


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: Dict[str, Any]
    sites: int
    local: Tuple[LocalClusteringConfig, ...]
    merge: MergeConfig
    partition: PartitionStrategy
    features: FeatureRecipe
    baseline: Optional[LocalClusteringConfig]
    merging_site: int
    seed: int
    out: Optional[str] = None

    def __post_init__(self):
        if self.sites < 1:
            raise ValueError("sites must be >= 1")
        if len(self.local) != self.sites:
            raise ValueError(f"{self.sites} sites but {len(self.local)} local configs")
        if not 0 <= self.merging_site < self.sites:
            raise ValueError("merging_site out of range")

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "ExperimentConfig":
        unknown = set(raw) - {
            "dataset", "sites", "local", "merge", "partition", "features",
            "baseline", "merging_site", "seed", "out",
        }
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        seed = int(raw.get("seed", 0))
        sites = int(raw.get("sites", 1))
        local_raw = raw.get("local", {})
        if isinstance(local_raw, dict):
            local_raw = [dict(local_raw) for _ in range(sites)]
        local = []
        for i, entry in enumerate(local_raw):
            entry = dict(entry)
            entry.setdefault("seed", derive_seed(seed, _SITE_STREAM + i))
            local.append(LocalClusteringConfig(**entry))
        baseline = raw.get("baseline")
        if baseline is not None:
            baseline = dict(baseline)
            baseline.setdefault("seed", derive_seed(seed, _BASELINE_STREAM))
            baseline = LocalClusteringConfig(**baseline)
        if "dataset" not in raw:
            raise ValueError("config needs a 'dataset' section")
        return cls(
            dataset=dict(raw["dataset"]),
            sites=sites,
            local=tuple(local),
            merge=MergeConfig(**raw.get("merge", {})),
            partition=PartitionStrategy(raw.get("partition", "random_uniform")),
            features=FeatureRecipe(raw.get("features", "identity")),
            baseline=baseline,
            merging_site=int(raw.get("merging_site", 0)),
            seed=seed,
            out=raw.get("out"),
        )

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "sites": self.sites,
            "local": [c.to_dict() for c in self.local],
            "merge": self.merge.to_dict(),
            "partition": self.partition.value,
            "features": self.features.value,
            "baseline": None if self.baseline is None else self.baseline.to_dict(),
            "merging_site": self.merging_site,
            "seed": self.seed,
        }


def load_dataset(cfg: ExperimentConfig) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Materialise the configured dataset and its ground truth, if any."""
    spec = cfg.dataset
    kind = spec.get("kind")
    if kind == "mixture":
        mixture = GaussianMixtureSpec(
            components=tuple(spec["components"]),
            total_points=int(spec["total_points"]),
            seed=int(spec.get("seed", derive_seed(cfg.seed, _DATA_STREAM))),
        )
        X, truth = generate_mixture(mixture)
    elif kind == "iris":
        X, labels = load_iris()
        truth = encode_labels(labels)
    elif kind == "csv":
        if "path" not in spec:
            raise ValueError("csv dataset needs a 'path'")
        X, labels = load_csv(spec["path"], spec.get("has_header", True), spec.get("label_column"))
        truth = None if labels is None else encode_labels(labels)
    else:
        raise ValueError(f"unknown dataset kind {kind!r}")
    return derive_features(X, cfg.features), truth


def execute(cfg: ExperimentConfig) -> Tuple[np.ndarray, RunResult]:
    X, truth = load_dataset(cfg)
    shards = partition(X, cfg.sites, cfg.partition, derive_seed(cfg.seed, _PARTITION_STREAM))
    result = run_pipeline(
        X,
        cfg.local,
        cfg.merge,
        cfg.seed,
        merging_site=cfg.merging_site,
        shards=shards,
        truth=truth,
        baseline=cfg.baseline,
    )
    return X, result


def result_document(cfg: ExperimentConfig, result: RunResult) -> str:
    doc = result.to_dict()
    doc["config"] = cfg.to_dict()
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_outputs(out_dir, cfg: ExperimentConfig, X: np.ndarray, result: RunResult) -> List[Path]:
    """Write result.json, trace.log, labels_site<i>.csv and points_labeled.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    coords = [f"x{j}" for j in range(X.shape[1])]
    written = []

    path = out / "result.json"
    path.write_text(result_document(cfg, result))
    written.append(path)

    path = out / "trace.log"
    path.write_text(result.trace.to_text())
    written.append(path)

    site_of = np.zeros(X.shape[0], dtype=np.int64)
    local_of = np.zeros(X.shape[0], dtype=np.int64)
    for site, glabels in zip(result.sites, result.site_labels):
        site_of[site.indices] = site.site_index
        local_of[site.indices] = site.local_result.assignment
        path = out / f"labels_site{site.site_index}.csv"
        write_csv(
            path,
            site.points,
            header=coords,
            extra=[
                ("row", site.indices.tolist()),
                ("local", site.local_result.assignment.tolist()),
                ("global", glabels.tolist()),
            ],
        )
        written.append(path)

    path = out / "points_labeled.csv"
    write_csv(
        path,
        X,
        header=coords,
        extra=[
            ("site", site_of.tolist()),
            ("local", local_of.tolist()),
            ("global", result.point_labels(X.shape[0]).tolist()),
        ],
    )
    written.append(path)
    return written
