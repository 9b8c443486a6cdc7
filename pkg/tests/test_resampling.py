from __future__ import annotations

import numpy as np
import pytest

from conftest import make_scoreset
from uqgate.errors import AlignmentMismatch, DegenerateLabels, StatisticUndefined
from uqgate.metrics import spearman_value
from uqgate.resampling import (
    VERDICT_DIFFERENT,
    VERDICT_EQUIVALENT,
    VERDICT_INCONCLUSIVE,
    bootstrap_ci,
    classify_equivalence,
    paired_equivalence,
)
from uqgate.scores import EstimatorId


def test_constant_data_collapses_interval():
    data = np.full(20, 3.5)
    ci = bootstrap_ci(lambda idx: float(data[idx].mean()), n=20, b=200, seed=1)
    assert ci.lo == ci.hi == ci.point == 3.5
    assert ci.skipped == 0


def test_same_seed_bit_identical():
    rng = np.random.default_rng(0)
    data = rng.normal(size=50)
    stat = lambda idx: float(data[idx].mean())  # noqa: E731
    a = bootstrap_ci(stat, n=50, b=300, seed=42)
    b = bootstrap_ci(stat, n=50, b=300, seed=42)
    assert (a.lo, a.hi, a.point) == (b.lo, b.hi, b.point)


def test_worker_count_does_not_change_result():
    rng = np.random.default_rng(1)
    data = rng.normal(size=80)
    stat = lambda idx: float(np.median(data[idx]))  # noqa: E731
    serial = bootstrap_ci(stat, n=80, b=240, seed=9, workers=1)
    threaded = bootstrap_ci(stat, n=80, b=240, seed=9, workers=4)
    assert (serial.lo, serial.hi, serial.point) == (threaded.lo, threaded.hi, threaded.point)


def test_interval_brackets_point_for_smooth_statistic():
    rng = np.random.default_rng(2)
    data = rng.normal(size=200)
    ci = bootstrap_ci(lambda idx: float(data[idx].mean()), n=200, b=500, seed=3)
    assert ci.lo <= ci.point <= ci.hi
    assert ci.b == 500 and ci.level == 0.95


def test_degenerate_resamples_are_redrawn_then_skipped():
    # a single error in the sample: many resamples miss it entirely
    values = np.arange(40, dtype=float)
    errors = np.zeros(40, dtype=int)
    errors[7] = 1

    def stat(idx):
        return spearman_value(values[idx], errors[idx])

    ci = bootstrap_ci(stat, n=40, b=300, seed=5)
    assert 0 <= ci.skipped < 300  # redraws keep the effective count near nominal
    assert np.isfinite(ci.lo) and np.isfinite(ci.hi)


def test_all_degenerate_raises():
    def always_degenerate(idx):
        raise DegenerateLabels("always")

    # undefined on the full sample propagates as-is
    with pytest.raises(DegenerateLabels):
        bootstrap_ci(always_degenerate, n=10, b=100, seed=0)

    # point defined but every resample fails -> StatisticUndefined
    identity = list(range(10))

    def degenerate_on_resamples(idx):
        if list(idx) == identity:
            return 0.0
        raise DegenerateLabels("resample")

    with pytest.raises(StatisticUndefined):
        bootstrap_ci(degenerate_on_resamples, n=10, b=100, seed=0)


def test_b_floor_enforced():
    with pytest.raises(ValueError):
        bootstrap_ci(lambda idx: 0.0, n=10, b=50, seed=0)


def test_paired_identical_scores_equivalent():
    ss = make_scoreset([0.1, 0.2, 0.3, 0.4, 0.5, 0.6], [0, 0, 1, 0, 1, 1])
    other = make_scoreset(ss.values.copy(), ss.errors.copy(),
                          estimator=EstimatorId.SOFTMAX_MARGIN)
    verdict = paired_equivalence(ss, other, metric="spearman_rho", b=200, seed=1)
    assert verdict.verdict == VERDICT_EQUIVALENT
    assert verdict.diff_ci.lo == verdict.diff_ci.hi == 0.0


def test_paired_alignment_mismatch():
    a = make_scoreset([0.1, 0.2, 0.3], [0, 1, 0])
    b = make_scoreset([0.1, 0.2, 0.3], [0, 1, 1])
    with pytest.raises(AlignmentMismatch):
        paired_equivalence(a, b, b=100)
    c = make_scoreset([0.1, 0.2, 0.3], [0, 1, 0], ids=("x", "y", "z"))
    with pytest.raises(AlignmentMismatch):
        paired_equivalence(a, c, b=100)


def test_paired_resampling_shares_index_draws(monkeypatch):
    # A and B differ by a constant offset; if both metric evaluations in a
    # replicate see the same index multiset, the recorded value arrays of
    # consecutive calls differ by exactly that offset, element-wise.
    import uqgate.resampling as resampling

    rng = np.random.default_rng(7)
    values = rng.normal(size=30)
    errors = (rng.random(30) < 0.4).astype(int)
    errors[0], errors[1] = 0, 1
    a = make_scoreset(values, errors)
    b = make_scoreset(values + 1000.0, errors, estimator=EstimatorId.SOFTMAX_MARGIN)

    calls = []
    real = spearman_value

    def recorder(vals, errs):
        calls.append(np.asarray(vals))
        return real(vals, errs)

    monkeypatch.setitem(resampling.METRIC_FUNCTIONS, "spearman_rho", recorder)
    paired_equivalence(a, b, metric="spearman_rho", b=100, seed=3)
    assert len(calls) >= 200  # point + replicates, two calls each
    for first, second in zip(calls[::2], calls[1::2]):
        np.testing.assert_allclose(second - first, 1000.0)


def test_verdict_trichotomy_definitional_cases():
    assert classify_equivalence(-0.004, 0.006, 0.01) == VERDICT_EQUIVALENT
    assert classify_equivalence(0.002, 0.03, 0.01) == VERDICT_DIFFERENT
    assert classify_equivalence(-0.02, 0.02, 0.01) == VERDICT_INCONCLUSIVE


def test_verdict_trichotomy_exhaustive():
    rng = np.random.default_rng(11)
    for _ in range(500):
        lo, hi = sorted(rng.uniform(-0.05, 0.05, size=2))
        verdict = classify_equivalence(lo, hi, 0.01)
        inside = -0.01 <= lo and hi <= 0.01
        excludes_zero = lo > 0 or hi < 0
        if inside:
            assert verdict == VERDICT_EQUIVALENT
        elif excludes_zero:
            assert verdict == VERDICT_DIFFERENT
        else:
            assert verdict == VERDICT_INCONCLUSIVE
