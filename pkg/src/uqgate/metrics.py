"""Tie-aware error-ranking metrics: Spearman rho and Mann-Whitney AUROC.

The error indicator is binary and therefore maximally tied, so Spearman is
computed as the Pearson correlation of mid-ranks (average rank within each
tie group) rather than with the tie-free shortcut formula. AUROC uses the
rank-sum form, which scores strict pairs 1 and tied pairs 1/2.

Both run in O(n log n) and are validated against O(n^2) pair-enumeration
oracles in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLabels, LengthMismatch


@dataclass(frozen=True)
class MetricValue:
    name: str  # "spearman_rho" | "auroc"
    value: float
    n: int
    n_errors: int


def midranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the average rank of their group."""
    x = np.asarray(x)
    order = np.argsort(x, kind="stable")
    sx = x[order]
    group_start = np.concatenate(([0], np.flatnonzero(sx[1:] != sx[:-1]) + 1))
    group_end = np.concatenate((group_start[1:], [len(x)]))
    avg = (group_start + group_end - 1) / 2.0 + 1.0
    ranks = np.empty(len(x), dtype=np.float64)
    ranks[order] = np.repeat(avg, group_end - group_start)
    return ranks


def _validate_pair(values: np.ndarray, errors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    values = np.asarray(values, dtype=np.float64)
    errors = np.asarray(errors)
    if values.shape != errors.shape or values.ndim != 1:
        raise LengthMismatch(
            f"values and errors must be equal-length vectors, got {values.shape} vs {errors.shape}"
        )
    if len(values) < 2:
        raise LengthMismatch("need at least 2 samples")
    n_err = int(np.sum(errors != 0))
    if n_err == 0 or n_err == len(values):
        raise DegenerateLabels(
            "all-correct" if n_err == 0 else "all-wrong"
        )
    return values, errors


def spearman_value(values: np.ndarray, errors: np.ndarray) -> float:
    """Mid-rank Spearman rho between scores and the 0/1 error indicator.

    Constant score vectors carry no ranking information; rho is defined as
    0.0 in that case (relevant for bootstrap resamples of heavily tied
    scores).
    """
    values, errors = _validate_pair(values, errors)
    rv = midranks(values)
    re_ = midranks(errors)
    rv = rv - rv.mean()
    re_ = re_ - re_.mean()
    denom = float(np.sqrt(np.dot(rv, rv) * np.dot(re_, re_)))
    if denom == 0.0:
        return 0.0
    return float(np.dot(rv, re_)) / denom


def auroc_value(values: np.ndarray, errors: np.ndarray) -> float:
    """Mann-Whitney AUROC of scores against the error indicator (errors positive)."""
    values, errors = _validate_pair(values, errors)
    pos = np.asarray(errors) != 0
    n_pos = int(pos.sum())
    n_neg = len(values) - n_pos
    ranks = midranks(values)
    u = float(ranks[pos].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def spearman_rho(values: np.ndarray, errors: np.ndarray) -> MetricValue:
    value = spearman_value(values, errors)
    errors = np.asarray(errors)
    return MetricValue("spearman_rho", value, n=len(errors), n_errors=int(np.sum(errors != 0)))


def auroc(values: np.ndarray, errors: np.ndarray) -> MetricValue:
    value = auroc_value(values, errors)
    errors = np.asarray(errors)
    return MetricValue("auroc", value, n=len(errors), n_errors=int(np.sum(errors != 0)))


METRIC_FUNCTIONS = {
    "spearman_rho": spearman_value,
    "auroc": auroc_value,
}
