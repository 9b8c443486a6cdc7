"""Competence-transition detection over a family of runs.

A run family spans training-set fractions x seeds. A level qualifies when
every seed's bootstrap CI for Spearman rho has a positive lower bound and
the inter-seed standard deviation of rho is below the cap. The transition
is the lowest-accuracy qualifying level; levels are ordered by measured
mean accuracy (the fraction is the generator knob, accuracy the ordering
key).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLabels
from .ingest import RunFamily, RunLog
from .metrics import spearman_value
from .resampling import BootstrapCI, bootstrap_ci
from .rng import derive_seed, float_bits
from .scores import EstimatorId, score_run


@dataclass(frozen=True)
class SeedRho:
    model_seed: int
    rho: float | None
    ci: BootstrapCI | None
    degenerate: bool = False  # all-correct or all-wrong run; level disqualified


@dataclass(frozen=True)
class LevelStats:
    train_fraction: float
    mean_accuracy: float
    per_seed_rho: tuple[SeedRho, ...]
    rho_std: float | None  # None when any seed is degenerate
    qualifies: bool


@dataclass(frozen=True)
class CompetenceReport:
    estimator: EstimatorId
    levels: tuple[LevelStats, ...]  # ascending mean accuracy
    transition_fraction: float | None
    transition_accuracy: float | None
    ci_level: float
    std_cap: float


def _run_rho_ci(
    log: RunLog, estimator: EstimatorId, ci_level: float, b: int, seed: int, workers: int
) -> SeedRho:
    ss = score_run(log, estimator)
    try:
        rho = spearman_value(ss.values, ss.errors)
    except DegenerateLabels:
        return SeedRho(model_seed=log.meta.model_seed, rho=None, ci=None, degenerate=True)
    # Sub-seed from run identity, not list position, so adding runs to a
    # family never perturbs the CIs of existing ones.
    run_seed = derive_seed(seed, float_bits(log.meta.train_fraction), log.meta.model_seed)
    ci = bootstrap_ci(
        lambda idx: spearman_value(ss.values[idx], ss.errors[idx]),
        n=len(ss),
        b=b,
        level=ci_level,
        seed=run_seed,
        workers=workers,
    )
    return SeedRho(model_seed=log.meta.model_seed, rho=rho, ci=ci)


def _run_accuracy(log: RunLog, estimator: EstimatorId) -> float:
    ss = score_run(log, estimator)
    return 1.0 - float(np.mean(ss.errors != 0))


def level_qualifies(per_seed: tuple[SeedRho, ...], rho_std: float | None, std_cap: float) -> bool:
    """The per-level criterion: every seed's CI lower bound positive and the
    inter-seed rho standard deviation under the cap. Any degenerate seed
    disqualifies the level outright (an all-correct run gives no evidence of
    ranking reliability)."""
    if any(s.degenerate for s in per_seed) or rho_std is None:
        return False
    return all(s.ci is not None and s.ci.lo > 0.0 for s in per_seed) and rho_std < std_cap


def detect_transition(
    family: RunFamily,
    estimator: EstimatorId,
    ci_level: float = 0.95,
    std_cap: float = 0.05,
    b: int = 1000,
    seed: int = 0,
    std_ddof: int = 0,
    workers: int = 1,
) -> CompetenceReport:
    """Find the lowest-accuracy level with reliably positive error ranking.

    ``std_ddof`` selects population (0, default) or sample (1) normalization
    for the inter-seed standard deviation; with three seeds the choice is
    material, so it stays configurable.
    """
    estimator = EstimatorId(estimator)
    levels = []
    for level in family.levels:
        per_seed = tuple(
            _run_rho_ci(run, estimator, ci_level, b, seed, workers) for run in level.runs
        )
        mean_acc = float(np.mean([_run_accuracy(run, estimator) for run in level.runs]))
        if any(s.degenerate for s in per_seed):
            rho_std = None
        else:
            rhos = np.asarray([s.rho for s in per_seed], dtype=np.float64)
            rho_std = float(np.std(rhos, ddof=std_ddof)) if len(rhos) > std_ddof else 0.0
        qualifies = level_qualifies(per_seed, rho_std, std_cap)
        levels.append(
            LevelStats(
                train_fraction=level.train_fraction,
                mean_accuracy=mean_acc,
                per_seed_rho=per_seed,
                rho_std=rho_std,
                qualifies=qualifies,
            )
        )

    levels.sort(key=lambda s: s.mean_accuracy)
    transition = next((s for s in levels if s.qualifies), None)
    return CompetenceReport(
        estimator=estimator,
        levels=tuple(levels),
        transition_fraction=transition.train_fraction if transition else None,
        transition_accuracy=transition.mean_accuracy if transition else None,
        ci_level=ci_level,
        std_cap=std_cap,
    )
