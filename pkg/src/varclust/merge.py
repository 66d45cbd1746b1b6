"""Global merging of gathered sub-cluster summaries.

The merging process works on summaries alone. It first merges greedily,
always taking the admissible pair with the smallest variance increase, where
a pair is admissible when the pooled variance stays under ``sigma_factor``
times the larger of the two individual variances. A perturbation pass then
moves sub-clusters on the border of each global cluster to the nearest
foreign cluster whenever that lowers the total SSE.
"""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .stats import (
    GlobalCluster,
    SubClusterId,
    SubClusterSummary,
    euclidean,
    fold,
    merge_stats,
    remove_stats,
    total_sse,
    variance_increase,
)


class ConstraintMode(str, enum.Enum):
    NORMALIZED_VARIANCE = "normalized_variance"
    RAW_SSE = "raw_sse"

    @classmethod
    def parse(cls, value) -> "ConstraintMode":
        if isinstance(value, cls):
            return value
        aliases = {"normalized": "normalized_variance", "raw": "raw_sse"}
        value = str(value).lower()
        return cls(aliases.get(value, value))


@dataclass(frozen=True)
class MergeConfig:
    constraint_mode: ConstraintMode = ConstraintMode.NORMALIZED_VARIANCE
    sigma_factor: float = 2.0
    border_fraction: float = 0.2
    multi_attr_epsilon: float = 0.1
    max_perturbation_passes: int = 5
    # two zero-variance operands merge only if increase/count < floor * scale^2
    zero_variance_floor: float = 1e-12
    # a move must lower the SSE of the two touched clusters by this fraction
    move_rtol: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "constraint_mode", ConstraintMode.parse(self.constraint_mode))
        if not self.sigma_factor > 0:
            raise ValueError("sigma_factor must be > 0")
        if not 0 < self.border_fraction <= 1:
            raise ValueError("border_fraction must lie in (0, 1]")
        if self.multi_attr_epsilon < 0:
            raise ValueError("multi_attr_epsilon must be >= 0")
        if self.max_perturbation_passes < 1:
            raise ValueError("max_perturbation_passes must be >= 1")

    def to_dict(self) -> dict:
        return {
            "constraint_mode": self.constraint_mode.value,
            "sigma_factor": self.sigma_factor,
            "border_fraction": self.border_fraction,
            "multi_attr_epsilon": self.multi_attr_epsilon,
            "max_perturbation_passes": self.max_perturbation_passes,
            "zero_variance_floor": self.zero_variance_floor,
            "move_rtol": self.move_rtol,
        }


def format_id(sid: SubClusterId) -> str:
    return f"{sid[0]}:{sid[1]}"


def parse_id(text: str) -> SubClusterId:
    site, local = text.split(":")
    return int(site), int(local)


@dataclass(frozen=True)
class TraceEvent:
    kind: str  # "merge", "move" or "reject"
    actors: Tuple[str, ...]
    variance_delta: float
    total_sse_after: float

    def to_line(self) -> str:
        return "\t".join(
            [self.kind, ",".join(self.actors), repr(self.variance_delta), repr(self.total_sse_after)]
        )

    @classmethod
    def from_line(cls, line: str) -> "TraceEvent":
        kind, actors, delta, total = line.rstrip("\n").split("\t")
        return cls(kind, tuple(actors.split(",")), float(delta), float(total))


@dataclass
class MergeTrace:
    events: List[TraceEvent] = field(default_factory=list)
    perturbation_passes: int = 0

    def of_kind(self, kind: str) -> List[TraceEvent]:
        return [e for e in self.events if e.kind == kind]

    def extend(self, other: "MergeTrace") -> None:
        self.events.extend(other.events)
        self.perturbation_passes += other.perturbation_passes

    def to_text(self) -> str:
        return "".join(e.to_line() + "\n" for e in self.events)

    @classmethod
    def from_text(cls, text: str) -> "MergeTrace":
        return cls([TraceEvent.from_line(line) for line in text.splitlines() if line.strip()])


def merge_predicate(
    a: SubClusterSummary,
    b: SubClusterSummary,
    cfg: MergeConfig = MergeConfig(),
    scale_sq: float = 1.0,
) -> bool:
    """Whether merging ``a`` and ``b`` respects the variance limit.

    A zero increase is always admissible. When both operands have zero
    spread the limit would be zero, so the increase per point is compared
    against ``cfg.zero_variance_floor * scale_sq`` instead.
    """
    inc = variance_increase(a, b)
    if inc == 0.0:
        return True
    count = a.count + b.count
    if a.sse == 0.0 and b.sse == 0.0:
        return inc / count < cfg.zero_variance_floor * scale_sq
    merged_sse = a.sse + b.sse + inc
    if cfg.constraint_mode is ConstraintMode.RAW_SSE:
        return merged_sse < cfg.sigma_factor * max(a.sse, b.sse)
    return merged_sse / count < cfg.sigma_factor * max(a.variance, b.variance)


def _pooled_scale_sq(summaries: Sequence[SubClusterSummary]) -> float:
    pooled = fold(s.with_id(None) for s in summaries)
    return pooled.variance if pooled.variance > 0 else 1.0


def greedy_merge(
    summaries: Sequence[SubClusterSummary], cfg: MergeConfig = MergeConfig()
) -> Tuple[List[GlobalCluster], MergeTrace]:
    """Repeatedly merge the admissible pair with the smallest variance increase.

    Clusters are keyed by their smallest member id; ties on the increase go
    to the lexicographically smallest key pair. Input order is irrelevant.
    """
    if not summaries:
        raise ValueError("greedy_merge needs at least one summary")
    ordered = sorted(summaries, key=lambda s: s.id)
    ids = [s.id for s in ordered]
    if None in ids or len(set(ids)) != len(ids):
        raise ValueError("summary ids must be present and unique")
    scale_sq = _pooled_scale_sq(ordered)

    stats: Dict[SubClusterId, SubClusterSummary] = {s.id: s for s in ordered}
    members: Dict[SubClusterId, List[SubClusterId]] = {s.id: [s.id] for s in ordered}
    version: Dict[SubClusterId, int] = {s.id: 0 for s in ordered}
    heap: list = []

    def push(ka: SubClusterId, kb: SubClusterId) -> None:
        if kb < ka:
            ka, kb = kb, ka
        a, b = stats[ka], stats[kb]
        if merge_predicate(a, b, cfg, scale_sq):
            heapq.heappush(heap, (variance_increase(a, b), ka, kb, version[ka], version[kb]))

    for i, ka in enumerate(ids):
        for kb in ids[i + 1 :]:
            push(ka, kb)

    trace = MergeTrace()
    running = math.fsum(s.sse for s in ordered)
    while heap:
        inc, ka, kb, va, vb = heapq.heappop(heap)
        if stats.get(ka) is None or stats.get(kb) is None:
            continue
        if version[ka] != va or version[kb] != vb:
            continue
        merged = merge_stats(stats[ka], stats[kb])
        del stats[kb]
        members[ka].extend(members.pop(kb))
        stats[ka] = merged
        version[ka] += 1
        running = math.fsum(stats[k].sse for k in sorted(stats))
        trace.events.append(TraceEvent("merge", (format_id(ka), format_id(kb)), inc, running))
        for other in sorted(stats):
            if other != ka:
                push(ka, other)

    result = [
        GlobalCluster(tuple(sorted(members[k])), stats[k]) for k in sorted(stats)
    ]
    return result, trace


def compute_border(
    g: GlobalCluster,
    member_summaries: Mapping[SubClusterId, SubClusterSummary],
    k: int,
) -> List[SubClusterId]:
    """The ``k`` members whose centers lie farthest from ``g``'s center."""
    if k < 0:
        raise ValueError("border size must be >= 0")
    if k == 0:
        return []
    ranked = sorted(
        g.members,
        key=lambda m: (-euclidean(member_summaries[m].center, g.center), m),
    )
    return ranked[:k]


def border_size(g: GlobalCluster, cfg: MergeConfig) -> int:
    return max(1, round(cfg.border_fraction * len(g.members)))


def _nearest_foreign(center, centers: Sequence, own: int) -> Tuple[int, float]:
    best, best_d = -1, math.inf
    for j, c in enumerate(centers):
        if j == own:
            continue
        d = euclidean(center, c)
        if d < best_d:
            best, best_d = j, d
    return best, best_d


def find_multi_attributed(
    globals_: Sequence[GlobalCluster],
    member_summaries: Mapping[SubClusterId, SubClusterSummary],
    cfg: MergeConfig = MergeConfig(),
) -> List[SubClusterId]:
    """Members nearly equidistant between their own and a foreign center."""
    if len(globals_) < 2:
        return []
    centers = [g.center for g in globals_]
    found = []
    for i, g in enumerate(globals_):
        for m in g.members:
            c = member_summaries[m].center
            _, foreign = _nearest_foreign(c, centers, i)
            if foreign <= (1.0 + cfg.multi_attr_epsilon) * euclidean(c, g.center):
                found.append(m)
    return sorted(found)


def _canonical(members: Iterable[SubClusterId], lookup) -> GlobalCluster:
    ordered = tuple(sorted(members))
    return GlobalCluster(ordered, fold(lookup[m] for m in ordered))


def perturb(
    globals_: Sequence[GlobalCluster],
    summaries: Iterable[SubClusterSummary],
    cfg: MergeConfig = MergeConfig(),
) -> Tuple[List[GlobalCluster], MergeTrace]:
    """Move border and multi-attributed sub-clusters where total SSE drops.

    Each pass collects candidates from the current state, then tries them
    in order of distance to their nearest foreign center (closest first).
    A move that would empty its source is skipped. Passes stop once one
    makes no move or ``cfg.max_perturbation_passes`` is reached. Global
    clusters keep their positions; trace actors name them ``G<index>``.
    """
    lookup = {s.id: s for s in summaries}
    current = list(globals_)
    trace = MergeTrace()
    if len(current) < 2:
        return current, trace

    for _ in range(cfg.max_perturbation_passes):
        trace.perturbation_passes += 1
        centers = [g.center for g in current]
        candidates = set(find_multi_attributed(current, lookup, cfg))
        for g in current:
            candidates.update(compute_border(g, lookup, border_size(g, cfg)))
        order = sorted(
            candidates,
            key=lambda m: (_nearest_foreign(lookup[m].center, centers, _owner(current, m))[1], m),
        )

        moved = False
        for x in order:
            i = _owner(current, x)
            src = current[i]
            if len(src.members) == 1:
                continue
            j, _ = _nearest_foreign(lookup[x].center, [g.center for g in current], i)
            dst = current[j]
            part = lookup[x]
            new_src = remove_stats(src.summary, part)
            new_dst = merge_stats(dst.summary.with_id(None), part.with_id(None))
            before = src.summary.sse + dst.summary.sse
            delta = (new_src.sse + new_dst.sse) - before
            actors = (format_id(x), f"G{i}", f"G{j}")
            if delta < -cfg.move_rtol * before:
                current[i] = _canonical((m for m in src.members if m != x), lookup)
                current[j] = _canonical(dst.members + (x,), lookup)
                trace.events.append(TraceEvent("move", actors, delta, total_sse(current)))
                moved = True
            else:
                trace.events.append(TraceEvent("reject", actors, delta, total_sse(current)))
        if not moved:
            break

    return current, trace


def _owner(globals_: Sequence[GlobalCluster], sid: SubClusterId) -> int:
    for i, g in enumerate(globals_):
        if sid in g.members:
            return i
    raise KeyError(f"sub-cluster {sid} is not in any global cluster")


def with_borders(
    globals_: Sequence[GlobalCluster],
    lookup: Mapping[SubClusterId, SubClusterSummary],
    cfg: MergeConfig,
) -> List[GlobalCluster]:
    return [
        GlobalCluster(g.members, g.summary, tuple(compute_border(g, lookup, border_size(g, cfg))))
        for g in globals_
    ]


def merge_all(
    summaries: Sequence[SubClusterSummary], cfg: MergeConfig = MergeConfig()
) -> Tuple[List[GlobalCluster], MergeTrace]:
    """Greedy merge followed by perturbation; borders attached to the result."""
    merged, trace = greedy_merge(summaries, cfg)
    perturbed, ptrace = perturb(merged, summaries, cfg)
    trace.extend(ptrace)
    lookup = {s.id: s for s in summaries}
    return with_borders(perturbed, lookup, cfg), trace
