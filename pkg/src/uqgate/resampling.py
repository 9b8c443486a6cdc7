"""Nonparametric bootstrap with percentile CIs and practical-equivalence verdicts.

Replicate r of a run with master seed s draws its resample indices from the
derived seed ``derive_seed(s, r, attempt)`` (attempt 0 unless the statistic
was undefined on the draw and had to be redrawn). Replicates therefore
commute: any evaluation order or thread count yields bit-identical results.

Resamples on which the statistic is undefined (e.g. no errors drawn from a
high-accuracy log) are redrawn up to ``MAX_REDRAWS`` times, then skipped and
counted, keeping the effective replicate count near nominal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AlignmentMismatch, DegenerateLabels, StatisticUndefined
from .metrics import METRIC_FUNCTIONS
from .rng import spawn_rng
from .scores import ScoreSet
from .util import chunked_map

MAX_REDRAWS = 10

VERDICT_EQUIVALENT = "equivalent"
VERDICT_DIFFERENT = "different"
VERDICT_INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class BootstrapCI:
    """Percentile bootstrap confidence interval for one statistic."""

    point: float
    lo: float
    hi: float
    level: float = 0.95
    b: int = 1000
    seed: int = 0
    skipped: int = 0

    def __post_init__(self) -> None:
        if not self.lo <= self.hi:
            raise ValueError(f"interval bounds out of order: [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class EquivalenceVerdict:
    diff_ci: BootstrapCI
    delta: float = 0.01
    verdict: str = VERDICT_INCONCLUSIVE


def classify_equivalence(lo: float, hi: float, delta: float) -> str:
    """The trichotomy: CI inside [-delta, +delta] / excluding 0 / neither."""
    if -delta <= lo and hi <= delta:
        return VERDICT_EQUIVALENT
    if lo > 0.0 or hi < 0.0:
        return VERDICT_DIFFERENT
    return VERDICT_INCONCLUSIVE


def _replicate(
    statistic: Callable[[np.ndarray], float], n: int, seed: int, r: int
) -> float:
    for attempt in range(MAX_REDRAWS + 1):
        idx = spawn_rng(seed, r, attempt).integers(0, n, size=n)
        try:
            return float(statistic(idx))
        except (StatisticUndefined, DegenerateLabels):
            continue
    return np.nan  # skipped after exhausting redraws


def bootstrap_ci(
    statistic: Callable[[np.ndarray], float],
    n: int,
    b: int = 1000,
    level: float = 0.95,
    seed: int = 0,
    workers: int = 1,
) -> BootstrapCI:
    """Percentile CI of ``statistic`` over B resamples of size n with replacement.

    ``statistic`` receives an index multiset (length-n int array, repeats
    allowed) and must either return a float or raise StatisticUndefined /
    DegenerateLabels to request a redraw.

    The point estimate is the statistic on the identity index set; if that
    is undefined the error propagates (the full sample is degenerate and no
    CI is meaningful).
    """
    if n < 2:
        raise ValueError(f"need n >= 2 observations, got {n}")
    if b < 100:
        raise ValueError(f"need at least 100 replicates, got {b}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")

    point = float(statistic(np.arange(n)))
    reps = np.asarray(chunked_map(lambda r: _replicate(statistic, n, seed, r), b, workers))
    valid = reps[~np.isnan(reps)]
    skipped = int(b - valid.size)
    if valid.size == 0:
        raise StatisticUndefined(f"statistic undefined on all {b} resamples")
    alpha = (1.0 - level) / 2.0
    lo, hi = np.percentile(valid, [100.0 * alpha, 100.0 * (1.0 - alpha)], method="linear")
    return BootstrapCI(
        point=point, lo=float(lo), hi=float(hi), level=level, b=b, seed=seed, skipped=skipped
    )


def paired_equivalence(
    scores_a: ScoreSet,
    scores_b: ScoreSet,
    metric: str = "spearman_rho",
    delta: float = 0.01,
    b: int = 1000,
    level: float = 0.95,
    seed: int = 0,
    workers: int = 1,
) -> EquivalenceVerdict:
    """Paired-bootstrap practical-equivalence test between two estimators.

    Each replicate draws one index multiset and applies it to both score
    vectors, so the metric difference is computed on the same resampled
    test set. The verdict follows :func:`classify_equivalence` at margin
    ``delta``.
    """
    if metric not in METRIC_FUNCTIONS:
        raise ValueError(f"metric must be one of {sorted(METRIC_FUNCTIONS)}, got {metric!r}")
    if not scores_a.aligned_with(scores_b):
        raise AlignmentMismatch(
            "paired comparison requires identical sample order and error vector"
        )
    fn = METRIC_FUNCTIONS[metric]
    va, vb, errs = scores_a.values, scores_b.values, scores_a.errors

    def diff_statistic(idx: np.ndarray) -> float:
        e = errs[idx]
        return fn(va[idx], e) - fn(vb[idx], e)

    ci = bootstrap_ci(diff_statistic, n=len(va), b=b, level=level, seed=seed, workers=workers)
    return EquivalenceVerdict(
        diff_ci=ci, delta=delta, verdict=classify_equivalence(ci.lo, ci.hi, delta)
    )
