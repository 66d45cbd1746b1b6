"""Variance-constrained distributed clustering from mergeable sub-cluster summaries."""

from .harness import CommLedger, RunResult, adjusted_rand_index, centralized_baseline, partition, run_pipeline
from .local import Algorithm, LocalClusteringConfig, LocalResult, kharmonic_means, kmeans, summarize_result
from .merge import (
    ConstraintMode,
    MergeConfig,
    MergeTrace,
    compute_border,
    find_multi_attributed,
    greedy_merge,
    merge_all,
    merge_predicate,
    perturb,
)
from .stats import (
    GlobalCluster,
    SubClusterSummary,
    merge_stats,
    remove_stats,
    summarize,
    total_sse,
    variance_increase,
)

__version__ = "0.1.0"
