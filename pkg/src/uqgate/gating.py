"""Threshold policies: coverage calibration, risk-coverage evaluation,
act/defer agreement, and cost-sensitive threshold optimization.

Execution is inclusive at the threshold: a sample is executed iff its
uncertainty u satisfies u <= tau. Coverage and executed-error counts are
step functions of tau that change only at observed score values, so every
sweep works on observed values rather than an interpolated grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentMismatch, EmptyScores
from .scores import ScoreSet
from .util import safe_ceil

COVERAGE_GRID_DEFAULT = (0.5, 0.6, 0.7, 0.8, 0.9)
COST_RATIO_GRID_DEFAULT = (0.5, 1.0, 2.0, 5.0, 10.0, 20.0)


@dataclass(frozen=True)
class ThresholdCalibration:
    """A coverage-calibrated threshold.

    ``achieved_coverage`` can overshoot the target when scores tie at tau;
    the overshoot is reported, never silently corrected.
    """

    tau: float
    target_coverage: float
    achieved_coverage: float


@dataclass(frozen=True)
class RiskCoveragePoint:
    tau: float
    coverage: float
    risk: float | None  # None when nothing is executed
    executed_errors: int
    executed: int
    n: int


@dataclass(frozen=True)
class CostModel:
    """Costs per executed error and per deferral (not both zero)."""

    c_err: float
    c_def: float

    def __post_init__(self) -> None:
        if self.c_err < 0.0 or self.c_def < 0.0:
            raise ValueError("costs must be non-negative")
        if self.c_err == 0.0 and self.c_def == 0.0:
            raise ValueError("at least one cost must be positive")


@dataclass(frozen=True)
class CostCurvePoint:
    tau: float
    coverage: float
    risk: float | None
    j: float


@dataclass(frozen=True)
class ThresholdOptimum:
    tau_star: float
    j_star: float
    curve: tuple[CostCurvePoint, ...]  # ascending tau


def _as_values(scores) -> np.ndarray:
    values = scores.values if isinstance(scores, ScoreSet) else np.asarray(scores, dtype=np.float64)
    if len(values) == 0:
        raise EmptyScores("no scores")
    return np.asarray(values, dtype=np.float64)


def calibrate_threshold(scores, target_coverage: float) -> ThresholdCalibration:
    """Smallest observed score value whose coverage reaches the target.

    Returns the order statistic u_(ceil(c * n)); no interpolation, so the
    threshold is always an attainable decision boundary of the sample.
    """
    values = _as_values(scores)
    if not 0.0 < target_coverage <= 1.0:
        raise ValueError(f"target_coverage must be in (0, 1], got {target_coverage}")
    n = len(values)
    k = max(1, safe_ceil(target_coverage * n))
    tau = float(np.sort(values, kind="stable")[k - 1])
    achieved = float(np.sum(values <= tau)) / n
    return ThresholdCalibration(tau=tau, target_coverage=target_coverage, achieved_coverage=achieved)


def evaluate_policy(scores, errors, tau: float) -> RiskCoveragePoint:
    """Coverage and executed risk of the policy "execute iff u <= tau"."""
    values = _as_values(scores)
    errors = np.asarray(errors)
    if values.shape != errors.shape:
        raise AlignmentMismatch(
            f"scores and errors must be aligned, got {values.shape} vs {errors.shape}"
        )
    executed_mask = values <= tau
    executed = int(executed_mask.sum())
    executed_errors = int(np.sum(errors[executed_mask] != 0))
    n = len(values)
    risk = executed_errors / executed if executed > 0 else None
    return RiskCoveragePoint(
        tau=float(tau),
        coverage=executed / n,
        risk=risk,
        executed_errors=executed_errors,
        executed=executed,
        n=n,
    )


def act_defer_agreement(scores_a, scores_b, target_coverage: float) -> float:
    """Fraction of samples getting the same act/defer decision under two
    estimators, each calibrated independently to the same target coverage.

    Under ties each estimator keeps its own achieved executed set (coverage
    overshoot stays visible in the agreement, by design).
    """
    if isinstance(scores_a, ScoreSet) and isinstance(scores_b, ScoreSet):
        if scores_a.sample_ids != scores_b.sample_ids:
            raise AlignmentMismatch("agreement requires score sets over the same samples")
    va = _as_values(scores_a)
    vb = _as_values(scores_b)
    if va.shape != vb.shape:
        raise AlignmentMismatch(f"score vectors differ in length: {va.shape} vs {vb.shape}")
    tau_a = calibrate_threshold(va, target_coverage).tau
    tau_b = calibrate_threshold(vb, target_coverage).tau
    return float(np.mean((va <= tau_a) == (vb <= tau_b)))


def optimize_threshold(
    scores, errors, cost: CostModel, grid: tuple[float, ...] | None = None
) -> ThresholdOptimum:
    """Minimize J(tau) = c_err * Risk * Cov + c_def * (1 - Cov) over thresholds.

    The candidate set is the caller grid (if any) plus every observed score
    value plus one defer-all candidate below the minimum, so every distinct
    coverage level is visited. Risk * Cov is computed as
    executed_errors / n, never as a product of rounded ratios. Ties in J
    break toward larger coverage.
    """
    values = _as_values(scores)
    errors = np.asarray(errors)
    if values.shape != errors.shape:
        raise AlignmentMismatch(
            f"scores and errors must be aligned, got {values.shape} vs {errors.shape}"
        )
    n = len(values)
    defer_all = float(values.min()) - 1.0
    candidates = set(float(v) for v in values)
    candidates.add(defer_all)
    if grid is not None:
        candidates.update(float(g) for g in grid)

    order = np.argsort(values, kind="stable")
    sorted_values = values[order]
    cum_errors = np.cumsum(np.asarray(errors)[order] != 0)

    curve = []
    best: CostCurvePoint | None = None
    for tau in sorted(candidates):
        executed = int(np.searchsorted(sorted_values, tau, side="right"))
        executed_errors = int(cum_errors[executed - 1]) if executed > 0 else 0
        coverage = executed / n
        j = cost.c_err * executed_errors / n + cost.c_def * (1.0 - coverage)
        point = CostCurvePoint(
            tau=tau, coverage=coverage, risk=executed_errors / executed if executed else None, j=j
        )
        curve.append(point)
        if best is None or j < best.j or (j == best.j and coverage > best.coverage):
            best = point
    assert best is not None
    return ThresholdOptimum(tau_star=best.tau, j_star=best.j, curve=tuple(curve))
