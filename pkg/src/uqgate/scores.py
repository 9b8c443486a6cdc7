"""The seven scalar uncertainty scores, all under "larger = more uncertain".

Entropy-family scores are normalized by ln K so outputs live in [0, 1]
regardless of the class count; margin and least confidence are reported as
1 - margin and 1 - max p for the same reason. Natural log throughout (the
normalization cancels the base).
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np

from .errors import MissingMembers, MissingPasses
from .ingest import PredictionRecord, RunLog


class EstimatorId(str, Enum):
    SOFTMAX_ENTROPY = "softmax_entropy"
    SOFTMAX_MARGIN = "softmax_margin"
    SOFTMAX_VARIATION_RATIO = "softmax_variation_ratio"
    SOFTMAX_LEAST_CONFIDENCE = "softmax_least_confidence"
    MC_ENTROPY = "mc_entropy"
    MC_EPISTEMIC_VARIANCE = "mc_epistemic_variance"
    ENSEMBLE_ENTROPY = "ensemble_entropy"


SOFTMAX_ESTIMATORS = (
    EstimatorId.SOFTMAX_ENTROPY,
    EstimatorId.SOFTMAX_MARGIN,
    EstimatorId.SOFTMAX_VARIATION_RATIO,
    EstimatorId.SOFTMAX_LEAST_CONFIDENCE,
)

ALL_ESTIMATORS = tuple(EstimatorId)


@dataclass(frozen=True, eq=False)
class ScoreSet:
    """Per-sample uncertainty values for one estimator, with error indicators.

    ``values[i]`` scores the i-th non-OOD record of the source log;
    ``errors[i]`` is 1 iff the argmax prediction (lowest index wins ties)
    differs from the label. OOD records are excluded by construction and
    counted in ``n_excluded``.
    """

    estimator: EstimatorId
    values: np.ndarray
    errors: np.ndarray
    sample_ids: tuple[str, ...]
    n_excluded: int = 0

    def __post_init__(self) -> None:
        if len(self.values) != len(self.errors) or len(self.values) != len(self.sample_ids):
            raise ValueError("values, errors, and sample_ids must be aligned")

    def __len__(self) -> int:
        return len(self.values)

    def aligned_with(self, other: "ScoreSet") -> bool:
        return self.sample_ids == other.sample_ids and np.array_equal(self.errors, other.errors)


def _normalized_entropy(p: np.ndarray) -> float:
    # 0 * ln 0 := 0
    nz = p[p > 0.0]
    h = -float(np.sum(nz * np.log(nz)))
    return h / float(np.log(p.shape[0]))


def _variation_ratio_from_passes(passes: np.ndarray) -> float:
    votes = passes.argmax(axis=1)  # first max wins ties
    counts = np.bincount(votes, minlength=passes.shape[1])
    modal = int(counts.argmax())  # lowest class index wins ties
    return 1.0 - counts[modal] / passes.shape[0]


def compute_score(record: PredictionRecord, estimator: EstimatorId) -> float:
    """Score one record. Larger means more uncertain.

    Raises MissingPasses / MissingMembers when the estimator needs data the
    record does not carry.
    """
    estimator = EstimatorId(estimator)
    p = record.probs
    if estimator is EstimatorId.SOFTMAX_ENTROPY:
        return _normalized_entropy(p)
    if estimator is EstimatorId.SOFTMAX_MARGIN:
        top2 = np.partition(p, -2)[-2:]
        return 1.0 - float(top2[1] - top2[0])
    if estimator is EstimatorId.SOFTMAX_LEAST_CONFIDENCE:
        return 1.0 - float(p.max())
    if estimator is EstimatorId.SOFTMAX_VARIATION_RATIO:
        if record.mc_passes is not None:
            return _variation_ratio_from_passes(record.mc_passes)
        return 1.0 - float(p.max())  # single-pass fallback, equals least confidence
    if estimator is EstimatorId.MC_ENTROPY:
        if record.mc_passes is None:
            raise MissingPasses(f"record {record.sample_id!r} has no stochastic passes")
        return _normalized_entropy(record.mc_passes.mean(axis=0))
    if estimator is EstimatorId.MC_EPISTEMIC_VARIANCE:
        if record.mc_passes is None:
            raise MissingPasses(f"record {record.sample_id!r} has no stochastic passes")
        return float(record.mc_passes.var(axis=0, ddof=0).sum())
    if estimator is EstimatorId.ENSEMBLE_ENTROPY:
        if record.ensemble_members is None:
            raise MissingMembers(f"record {record.sample_id!r} has no ensemble members")
        return _normalized_entropy(record.ensemble_members.mean(axis=0))
    raise ValueError(f"unknown estimator {estimator!r}")


def predicted_label(record: PredictionRecord) -> int:
    """Argmax prediction with the fixed tie-break (lowest class index)."""
    return int(record.probs.argmax())


def score_run(log: RunLog, estimator: EstimatorId) -> ScoreSet:
    """Score every non-OOD record of a log.

    OOD records (label -1) never enter error-ranking metrics; their count is
    reported in the result.
    """
    estimator = EstimatorId(estimator)
    values, errors, ids = [], [], []
    n_excluded = 0
    for rec in log.records:
        if rec.ood_flag:
            n_excluded += 1
            continue
        values.append(compute_score(rec, estimator))
        errors.append(0 if predicted_label(rec) == rec.label else 1)
        ids.append(rec.sample_id)
    return ScoreSet(
        estimator=estimator,
        values=np.asarray(values, dtype=np.float64),
        errors=np.asarray(errors, dtype=np.int8),
        sample_ids=tuple(ids),
        n_excluded=n_excluded,
    )


def scores_to_csv(score_sets: Iterable[ScoreSet]) -> str:
    """Flat CSV export (sample_id, estimator, value, error) for plotting."""
    buf = io.StringIO()
    buf.write("sample_id,estimator,value,error\n")
    for ss in score_sets:
        for sid, value, err in zip(ss.sample_ids, ss.values, ss.errors):
            buf.write(f"{sid},{ss.estimator.value},{format(float(value), '.17g')},{int(err)}\n")
    return buf.getvalue()
