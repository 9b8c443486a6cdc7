"""Temporal corruption operators, shift evaluation at a fixed clean
threshold, and semantic OOD detection scoring.

Corruption never touches probabilities: it transforms feature sequences,
and the owner of the model re-scores them (the synthetic oracle in tests,
an external model round trip in production via the NDJSON features field).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .errors import AlignmentMismatch, DegenerateLabels, EmptyScores, ShapeMismatch, TooShort
from .gating import calibrate_threshold, evaluate_policy
from .ingest import PredictionRecord, RunLog
from .metrics import auroc_value, spearman_value
from .rng import derive_seed, spawn_rng
from .scores import EstimatorId, ScoreSet, compute_score
from .util import safe_ceil, safe_floor

DROPOUT_FRACTIONS = (0.1, 0.2, 0.3, 0.4, 0.5)
NOISE_SIGMAS = (0.05, 0.10, 0.20, 0.30, 0.50)
JITTER_FRACTIONS = (0.1, 0.2, 0.3, 0.4, 0.5)

SHIFT_TARGET_COVERAGE = 0.8


class CorruptionKind(str, Enum):
    FRAME_DROPOUT = "frame_dropout"
    GAUSSIAN_NOISE = "gaussian_noise"
    TEMPORAL_JITTER = "temporal_jitter"


@dataclass(frozen=True)
class CorruptionSpec:
    kind: CorruptionKind
    severity: int  # 1..5
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.severity <= 5:
            raise ValueError(f"severity must be in 1..5, got {self.severity}")

    @property
    def level(self) -> float:
        """Severity mapped to its knob: dropout/jitter fraction or noise sigma."""
        table = {
            CorruptionKind.FRAME_DROPOUT: DROPOUT_FRACTIONS,
            CorruptionKind.GAUSSIAN_NOISE: NOISE_SIGMAS,
            CorruptionKind.TEMPORAL_JITTER: JITTER_FRACTIONS,
        }[CorruptionKind(self.kind)]
        return table[self.severity - 1]


def corrupt_sequence(features: np.ndarray, spec: CorruptionSpec) -> np.ndarray:
    """Apply one corruption to a T x D feature sequence.

    frame_dropout removes floor(f*T) uniformly chosen frames keeping the
    survivors' order; gaussian_noise adds i.i.d. N(0, sigma^2) to every
    entry; temporal_jitter applies floor(f*T) uniformly chosen transpositions
    of distinct frame indices, sequentially. All randomness comes from
    ``spec.seed``.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ShapeMismatch("features must be a T x D matrix")
    t = features.shape[0]
    if t < 2:
        raise TooShort(f"need at least 2 frames, got {t}")
    rng = spawn_rng(spec.seed)
    kind = CorruptionKind(spec.kind)

    if kind is CorruptionKind.GAUSSIAN_NOISE:
        return features + rng.normal(0.0, spec.level, size=features.shape)

    n_affected = safe_floor(spec.level * t)
    if kind is CorruptionKind.FRAME_DROPOUT:
        if n_affected >= t:
            raise TooShort(f"dropping {n_affected} of {t} frames would empty the sequence")
        if n_affected == 0:
            return features.copy()
        drop = rng.choice(t, size=n_affected, replace=False)
        keep = np.setdiff1d(np.arange(t), drop)  # sorted: survivor order preserved
        return features[keep]

    # temporal jitter
    perm = np.arange(t)
    for _ in range(n_affected):
        a = int(rng.integers(t))
        b = int(rng.integers(t - 1))
        if b >= a:
            b += 1
        perm[a], perm[b] = perm[b], perm[a]
    return features[perm]


def corrupt_log(log: RunLog, spec: CorruptionSpec) -> RunLog:
    """Corrupt the feature sequence of every record.

    Record i uses the sub-seed derived from (spec.seed, i), so records are
    independent and order-insensitive. Probabilities and passes are carried
    over unchanged — they describe the clean input and become stale until
    the log is re-scored by a model.
    """
    records = []
    for i, rec in enumerate(log.records):
        if rec.features is None:
            raise ShapeMismatch(f"record {rec.sample_id!r} carries no features to corrupt")
        rec_spec = replace(spec, seed=derive_seed(spec.seed, i))
        records.append(replace(rec, features=corrupt_sequence(rec.features, rec_spec)))
    return RunLog(records=tuple(records), meta=log.meta)


@dataclass(frozen=True)
class ShiftRow:
    """Shift measurements for one (corruption, severity) cell."""

    kind: str
    severity: int
    tau_star: float
    accuracy: float
    mean_uncertainty: float
    executed_error_clean: float | None
    executed_error_shifted: float | None
    rho_shifted: float | None
    coverage_shifted: float


@dataclass(frozen=True)
class ShiftReport:
    estimator: EstimatorId
    target_coverage: float
    tau_star: float  # calibrated once on clean calibration scores, reused everywhere
    rows: tuple[ShiftRow, ...]


def shift_evaluation(
    clean_calib: ScoreSet,
    clean_test: ScoreSet,
    shifted_test: ScoreSet,
    target_coverage: float = SHIFT_TARGET_COVERAGE,
    kind: str = "",
    severity: int = 0,
    tau_star: float | None = None,
) -> ShiftRow:
    """One shift-report row: fixed clean threshold applied to shifted scores.

    ``shifted_test`` must cover the same samples as ``clean_test`` (same id
    order) re-scored after corruption; its errors may of course differ.
    """
    if clean_test.sample_ids != shifted_test.sample_ids:
        raise AlignmentMismatch("shifted scores must cover the same samples as the clean test set")
    if tau_star is None:
        tau_star = calibrate_threshold(clean_calib.values, target_coverage).tau
    clean_point = evaluate_policy(clean_test.values, clean_test.errors, tau_star)
    shifted_point = evaluate_policy(shifted_test.values, shifted_test.errors, tau_star)
    try:
        rho = spearman_value(shifted_test.values, shifted_test.errors)
    except DegenerateLabels:
        rho = None
    return ShiftRow(
        kind=kind,
        severity=severity,
        tau_star=tau_star,
        accuracy=1.0 - float(np.mean(shifted_test.errors != 0)),
        mean_uncertainty=float(np.mean(shifted_test.values)),
        executed_error_clean=clean_point.risk,
        executed_error_shifted=shifted_point.risk,
        rho_shifted=rho,
        coverage_shifted=shifted_point.coverage,
    )


def build_shift_report(
    clean_calib: ScoreSet,
    clean_test: ScoreSet,
    shifted: Mapping[tuple[str, int], ScoreSet],
    target_coverage: float = SHIFT_TARGET_COVERAGE,
) -> ShiftReport:
    """Assemble rows for several (kind, severity) cells under one threshold."""
    tau_star = calibrate_threshold(clean_calib.values, target_coverage).tau
    rows = tuple(
        shift_evaluation(
            clean_calib,
            clean_test,
            scores,
            target_coverage=target_coverage,
            kind=str(kind),
            severity=int(severity),
            tau_star=tau_star,
        )
        for (kind, severity), scores in sorted(shifted.items())
    )
    return ShiftReport(
        estimator=clean_test.estimator,
        target_coverage=target_coverage,
        tau_star=tau_star,
        rows=rows,
    )


def ood_auroc(id_scores, ood_scores) -> float:
    """AUROC of uncertainty as an OOD detector, OOD being the positive class."""
    id_scores = np.asarray(id_scores, dtype=np.float64)
    ood_scores = np.asarray(ood_scores, dtype=np.float64)
    if id_scores.size == 0 or ood_scores.size == 0:
        raise EmptyScores("both in-distribution and OOD score sets must be non-empty")
    values = np.concatenate([id_scores, ood_scores])
    labels = np.concatenate([np.zeros(id_scores.size), np.ones(ood_scores.size)])
    return auroc_value(values, labels)


def split_scores_by_ood(log: RunLog, estimator: EstimatorId) -> tuple[np.ndarray, np.ndarray]:
    """Score all records of a log and split into (in-distribution, OOD)."""
    estimator = EstimatorId(estimator)
    id_vals, ood_vals = [], []
    for rec in log.records:
        (ood_vals if rec.ood_flag else id_vals).append(compute_score(rec, estimator))
    return np.asarray(id_vals, dtype=np.float64), np.asarray(ood_vals, dtype=np.float64)


def rare_class_split(label_histogram: Mapping[int, int], fraction: float = 0.2) -> frozenset[int]:
    """The ceil(fraction * K) lowest-count classes; count ties break toward
    the lower class index."""
    if len(label_histogram) < 2:
        raise ValueError("need at least 2 classes")
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    k = len(label_histogram)
    m = max(1, safe_ceil(fraction * k))
    ordered = sorted(label_histogram.items(), key=lambda item: (item[1], item[0]))
    return frozenset(cls for cls, _ in ordered[:m])


def label_histogram(labels: Sequence[int] | np.ndarray) -> dict[int, int]:
    values, counts = np.unique(np.asarray(labels), return_counts=True)
    return {int(v): int(c) for v, c in zip(values, counts)}
