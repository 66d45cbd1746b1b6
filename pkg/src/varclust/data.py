"""Synthetic mixtures, CSV ingestion and feature recipes."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .stats import as_dataset


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    mean: Tuple[float, ...]
    stddev: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "mean", tuple(float(v) for v in self.mean))
        object.__setattr__(self, "stddev", tuple(float(v) for v in self.stddev))
        if not self.weight > 0:
            raise ValueError("component weight must be > 0")
        if len(self.mean) != len(self.stddev) or not self.mean:
            raise ValueError("mean and stddev must be non-empty and of equal length")
        if any(not s > 0 for s in self.stddev):
            raise ValueError("stddev entries must be > 0")


@dataclass(frozen=True)
class GaussianMixtureSpec:
    components: Tuple[MixtureComponent, ...]
    total_points: int
    seed: int = 0

    def __post_init__(self):
        comps = tuple(
            c if isinstance(c, MixtureComponent) else MixtureComponent(**c) for c in self.components
        )
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("a mixture needs at least one component")
        if abs(math.fsum(c.weight for c in comps) - 1.0) > 1e-9:
            raise ValueError("component weights must sum to 1")
        if len({len(c.mean) for c in comps}) != 1:
            raise ValueError("all components must share one dimensionality")
        if self.total_points < 1:
            raise ValueError("total_points must be >= 1")

    @property
    def dim(self) -> int:
        return len(self.components[0].mean)

    def to_dict(self) -> dict:
        return {
            "components": [
                {"weight": c.weight, "mean": list(c.mean), "stddev": list(c.stddev)}
                for c in self.components
            ],
            "total_points": self.total_points,
            "seed": self.seed,
        }


def generate_mixture(spec: GaussianMixtureSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Sample ``spec.total_points`` points; returns (points, component labels)."""
    rng = np.random.default_rng(spec.seed)
    weights = np.array([c.weight for c in spec.components])
    labels = rng.choice(len(weights), size=spec.total_points, p=weights / weights.sum())
    means = np.array([c.mean for c in spec.components])
    stds = np.array([c.stddev for c in spec.components])
    noise = rng.standard_normal((spec.total_points, spec.dim))
    return means[labels] + noise * stds[labels], labels


def _parse_row(row: Sequence[str], lineno: int, label_idx: Optional[int]):
    features = []
    label = None
    for j, cell in enumerate(row):
        if j == label_idx:
            label = cell.strip()
            continue
        try:
            value = float(cell)
        except ValueError:
            raise ValueError(f"row {lineno}: non-numeric cell {cell!r} in column {j}") from None
        if not math.isfinite(value):
            raise ValueError(f"row {lineno}: non-finite value in column {j}")
        features.append(value)
    return features, label


def load_csv(
    path: Union[str, Path],
    has_header: bool = True,
    label_column: Union[int, str, None] = None,
) -> Tuple[np.ndarray, Optional[List[str]]]:
    """Read a rectangular numeric CSV, optionally keeping one label column.

    ``label_column`` may be a column index or, with a header, its name.
    Errors name the offending (1-based) file line.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    with path.open(newline="") as fh:
        rows = [(i + 1, r) for i, r in enumerate(csv.reader(fh)) if any(c.strip() for c in r)]
    header = None
    if has_header and rows:
        header = rows[0][1]
        rows = rows[1:]
    label_idx = label_column
    if isinstance(label_column, str):
        if header is None or label_column not in header:
            raise ValueError(f"label column {label_column!r} not found in header")
        label_idx = header.index(label_column)
    if not rows:
        raise ValueError(f"{path}: no data rows")

    width = len(header) if header is not None else len(rows[0][1])
    data, labels = [], []
    for lineno, row in rows:
        if len(row) != width:
            raise ValueError(f"row {lineno}: expected {width} columns, found {len(row)}")
        features, label = _parse_row(row, lineno, label_idx)
        data.append(features)
        labels.append(label)
    return as_dataset(np.array(data)), (labels if label_idx is not None else None)


def write_csv(path: Union[str, Path], points, header: Optional[Sequence[str]] = None, extra=None) -> None:
    """Write points with 17 significant digits so a reload is exact.

    ``extra`` is an optional sequence of (name, column) pairs appended after
    the coordinates.
    """
    X = as_dataset(points)
    extra = list(extra or [])
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(list(header) + [name for name, _ in extra])
        for i, row in enumerate(X):
            w.writerow([format(v, ".17g") for v in row] + [col[i] for _, col in extra])


class FeatureRecipe(str, enum.Enum):
    IDENTITY = "identity"
    IRIS_AREAS = "iris_areas"


def derive_features(dataset, recipe: Union[FeatureRecipe, str] = FeatureRecipe.IDENTITY) -> np.ndarray:
    """``iris_areas`` maps (sl, sw, pl, pw, ...) to (sl*sw, pl*pw)."""
    X = as_dataset(dataset)
    recipe = FeatureRecipe(recipe)
    if recipe is FeatureRecipe.IDENTITY:
        return X
    if X.shape[1] < 4:
        raise ValueError(f"iris_areas needs at least 4 columns, got {X.shape[1]}")
    return np.column_stack([X[:, 0] * X[:, 1], X[:, 2] * X[:, 3]])


def iris_path() -> Path:
    return Path(str(resources.files("varclust") / "data" / "iris.csv"))


def load_iris() -> Tuple[np.ndarray, List[str]]:
    """The bundled 150-row, 4-attribute Iris table with species labels."""
    return load_csv(iris_path(), has_header=True, label_column="species")


def encode_labels(labels: Sequence) -> np.ndarray:
    """Map arbitrary class labels to dense integers in sorted label order."""
    return np.unique(np.asarray(labels), return_inverse=True)[1]
