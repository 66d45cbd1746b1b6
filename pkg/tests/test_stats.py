import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varclust.stats import (
    GlobalCluster,
    NumericalWarning,
    SubClusterSummary,
    fold,
    merge_stats,
    remove_stats,
    summarize,
    total_sse,
    variance_increase,
)


def brute_sse(points):
    pts = np.asarray(points, dtype=float)
    mean = pts.sum(axis=0) / len(pts)
    return sum(float(((p - mean) ** 2).sum()) for p in pts)


def welford(points):
    """Streaming mean/M2 accumulator, independent of the two-pass summarize."""
    n = 0
    mean = None
    m2 = 0.0
    for p in np.asarray(points, dtype=float):
        n += 1
        if mean is None:
            mean = p.copy()
            continue
        delta = p - mean
        mean = mean + delta / n
        m2 += float(np.dot(delta, p - mean))
    return n, mean, m2


def single(x, sid):
    return summarize([x], id=sid)


def test_merge_two_singletons():
    m = merge_stats(single((0, 0), (0, 0)), single((2, 0), (0, 1)))
    assert m.count == 2
    np.testing.assert_array_equal(m.center, [1.0, 0.0])
    assert m.sse == 2.0


def test_merge_coincident_centers_adds_sse():
    a = summarize([(0, 0), (2, 0)], id=(0, 0))
    b = summarize([(1, 1), (1, -1)], id=(1, 0))
    assert variance_increase(a, b) == 0.0
    assert merge_stats(a, b).sse == a.sse + b.sse


def test_merge_matches_pooled_sse():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(50, 2))
    split = rng.permutation(50)
    left, right = pts[split[:21]], pts[split[21:]]
    m = merge_stats(summarize(left, id=(0, 0)), summarize(right, id=(0, 1)))
    assert m.count == 50
    assert math.isclose(m.sse, brute_sse(pts), rel_tol=1e-9)


def test_merge_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        merge_stats(single((0, 0), (0, 0)), single((0, 0, 0), (0, 1)))


def test_merge_same_id_rejected():
    a = single((0, 0), (0, 0))
    with pytest.raises(ValueError):
        merge_stats(a, a)


def test_variance_increase_examples():
    assert variance_increase(single((0, 0), (0, 0)), single((2, 0), (0, 1))) == 2.0
    assert variance_increase(single((3, 3), (0, 0)), single((3, 3), (0, 1))) == 0.0


def test_variance_increase_unequal_counts_against_pooled_oracle():
    rng = np.random.default_rng(11)
    a_pts = rng.normal(size=(30, 3))
    b_pts = rng.normal(size=(70, 3))
    # shift so the group means are exactly one unit apart along the first axis
    a_pts -= a_pts.mean(axis=0)
    b_pts -= b_pts.mean(axis=0)
    b_pts[:, 0] += 1.0
    a, b = summarize(a_pts, id=(0, 0)), summarize(b_pts, id=(0, 1))
    oracle = brute_sse(np.vstack([a_pts, b_pts])) - brute_sse(a_pts) - brute_sse(b_pts)
    assert math.isclose(oracle, 21.0, rel_tol=1e-9)
    assert math.isclose(variance_increase(a, b), 21.0, rel_tol=1e-12)
    assert variance_increase(a, b) == variance_increase(b, a)


def test_remove_singleton_recovers_other():
    a, b = single((0, 0), (0, 0)), single((2, 0), (0, 1))
    r = remove_stats(merge_stats(a, b), b)
    assert r.count == 1 and r.sse == 0.0
    np.testing.assert_array_equal(r.center, [0.0, 0.0])


def test_remove_round_trip():
    rng = np.random.default_rng(5)
    a = summarize(rng.normal(size=(17, 4)), id=(0, 0))
    b = summarize(rng.normal(loc=3, size=(9, 4)), id=(1, 0))
    r = remove_stats(merge_stats(a, b), b)
    assert r.count == a.count
    np.testing.assert_allclose(r.center, a.center, rtol=1e-9, atol=1e-12)
    assert math.isclose(r.sse, a.sse, rel_tol=1e-9)


def test_remove_from_three_way_fold():
    rng = np.random.default_rng(8)
    groups = [rng.normal(loc=i, size=(10 + 3 * i, 2)) for i in range(3)]
    whole = fold(summarize(g, id=(0, i)) for i, g in enumerate(groups))
    r = remove_stats(whole, summarize(groups[1], id=(0, 1)))
    rest = np.vstack([groups[0], groups[2]])
    assert r.count == len(rest)
    np.testing.assert_allclose(r.center, rest.mean(axis=0), rtol=1e-9, atol=1e-12)
    assert math.isclose(r.sse, brute_sse(rest), rel_tol=1e-9)


def test_remove_too_large_part():
    a = summarize([(0, 0), (1, 0)], id=(0, 0))
    with pytest.raises(ValueError):
        remove_stats(a, summarize([(0, 0), (1, 0), (2, 0)], id=(0, 1)))


def test_remove_clamps_tiny_negative_and_rejects_large():
    whole = SubClusterSummary((0, 0), 4, [0.0, 0.0], 1.0)
    # a part claiming marginally more sse than the whole: cancellation noise
    almost = SubClusterSummary((0, 1), 2, [0.0, 0.0], 1.0 + 1e-12)
    with pytest.warns(NumericalWarning):
        r = remove_stats(whole, almost)
    assert r.sse == 0.0
    with pytest.raises(ValueError):
        remove_stats(whole, SubClusterSummary((0, 2), 2, [0.0, 0.0], 2.0))


def test_summarize_examples():
    s = summarize([(1, 1)])
    assert (s.count, s.sse) == (1, 0.0)
    np.testing.assert_array_equal(s.center, [1, 1])
    s = summarize([(0, 0), (2, 0), (1, 3)])
    assert s.count == 3
    np.testing.assert_allclose(s.center, [1, 1])
    assert math.isclose(s.sse, 8.0, rel_tol=1e-15)


def test_summarize_rejects_empty_and_nonfinite():
    with pytest.raises(ValueError):
        summarize(np.empty((0, 2)))
    with pytest.raises(ValueError):
        summarize([(0.0, float("nan"))])


@pytest.mark.parametrize("seed", range(5))
def test_summarize_agrees_with_streaming(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(loc=rng.uniform(-50, 50, size=3), scale=rng.uniform(0.1, 5), size=(200, 3))
    s = summarize(pts)
    n, mean, m2 = welford(pts)
    assert s.count == n
    np.testing.assert_allclose(s.center, mean, rtol=1e-10)
    assert math.isclose(s.sse, m2, rel_tol=1e-10)


def test_summary_invariants():
    with pytest.raises(ValueError):
        SubClusterSummary((0, 0), 0, [0.0], 0.0)
    with pytest.raises(ValueError):
        SubClusterSummary((0, 0), 2, [0.0], -1.0)
    with pytest.raises(ValueError):
        SubClusterSummary((0, 0), 1, [0.0], 0.5)
    s = SubClusterSummary((0, 0), 2, [1.0, 2.0], 4.0)
    assert s.variance == 2.0
    with pytest.raises(ValueError):
        s.center[0] = 5.0


def test_total_sse():
    assert total_sse([]) == 0
    s = summarize([(0, 0), (0, 2)], id=(0, 0))
    g = GlobalCluster(((0, 0),), s)
    assert total_sse([g]) == s.sse
    assert total_sse([g, GlobalCluster(((1, 0),), s.with_id((1, 0)))]) == 2 * s.sse


# --- properties ------------------------------------------------------------

point_sets = st.integers(min_value=2, max_value=60).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.integers(min_value=1, max_value=6),
        st.integers(min_value=0, max_value=2**32 - 1),
    )
)


def _random_groups(n, d, seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(loc=rng.uniform(-10, 10, size=d), scale=rng.uniform(0.1, 10), size=(n, d))
    k = int(rng.integers(1, n + 1))
    labels = rng.integers(k, size=n)
    labels[:k] = np.arange(k)  # every group non-empty
    return pts, [pts[labels == g] for g in range(k)]


@settings(max_examples=150, deadline=None)
@given(point_sets)
def test_fold_of_any_partition_equals_summary_of_all(args):
    n, d, seed = args
    pts, groups = _random_groups(n, d, seed)
    whole = summarize(pts)
    folded = fold(summarize(g, id=(0, i)) for i, g in enumerate(groups))
    scale = max(np.abs(pts).max(), 1.0)
    assert folded.count == whole.count
    assert np.linalg.norm(folded.center - whole.center) <= 1e-9 * scale
    assert math.isclose(folded.sse, whole.sse, rel_tol=1e-9, abs_tol=1e-12 * scale**2)


@settings(max_examples=100, deadline=None)
@given(point_sets, st.randoms(use_true_random=False))
def test_fold_is_order_independent(args, rnd):
    n, d, seed = args
    _, groups = _random_groups(n, d, seed)
    summaries = [summarize(g, id=(0, i)) for i, g in enumerate(groups)]
    shuffled = summaries[:]
    rnd.shuffle(shuffled)
    a, b = fold(summaries), fold(shuffled)
    assert a.count == b.count
    np.testing.assert_allclose(a.center, b.center, rtol=1e-9, atol=1e-9)
    assert math.isclose(a.sse, b.sse, rel_tol=1e-9, abs_tol=1e-9)


@settings(max_examples=100, deadline=None)
@given(point_sets)
def test_increase_nonnegative_and_remove_inverts_merge(args):
    n, d, seed = args
    pts, groups = _random_groups(n, d, seed)
    if len(groups) < 2:
        return
    a = fold(summarize(g, id=(0, i)) for i, g in enumerate(groups[:-1]))
    b = summarize(groups[-1], id=(1, 0))
    inc = variance_increase(a, b)
    assert inc >= 0
    assert (inc == 0) == bool(np.all(a.center == b.center))
    r = remove_stats(merge_stats(a, b), b)
    scale = max(np.abs(pts).max(), 1.0)
    assert r.count == a.count
    assert np.linalg.norm(r.center - a.center) <= 1e-9 * scale
    assert math.isclose(r.sse, a.sse, rel_tol=1e-9, abs_tol=1e-9 * scale**2)
