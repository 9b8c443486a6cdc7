from __future__ import annotations

import numpy as np
import pytest

from uqgate.competence import SeedRho, detect_transition, level_qualifies
from uqgate.ingest import assemble_family
from uqgate.oracle import OracleConfig, generate_family, generate_run
from uqgate.resampling import BootstrapCI
from uqgate.scores import EstimatorId


def seed_rho(seed, rho, lo, hi=None, degenerate=False):
    if degenerate:
        return SeedRho(model_seed=seed, rho=None, ci=None, degenerate=True)
    ci = BootstrapCI(point=rho, lo=lo, hi=hi if hi is not None else lo + 0.2, b=200)
    return SeedRho(model_seed=seed, rho=rho, ci=ci)


def test_qualification_rule_on_constructed_stats():
    # one seed's CI lower bound dips below zero -> fails
    level_a = (seed_rho(0, 0.1, -0.02), seed_rho(1, 0.2, 0.05), seed_rho(2, 0.15, 0.02))
    assert not level_qualifies(level_a, rho_std=0.03, std_cap=0.05)
    # all CIs positive but seeds too dispersed -> fails
    level_b = (seed_rho(0, 0.1, 0.02), seed_rho(1, 0.3, 0.2), seed_rho(2, 0.2, 0.1))
    assert not level_qualifies(level_b, rho_std=0.08, std_cap=0.05)
    # all CIs positive and tight -> qualifies
    level_c = (seed_rho(0, 0.25, 0.15), seed_rho(1, 0.28, 0.18), seed_rho(2, 0.30, 0.2))
    assert level_qualifies(level_c, rho_std=0.03, std_cap=0.05)


def test_degenerate_seed_disqualifies_level():
    level = (seed_rho(0, 0.25, 0.15), seed_rho(1, None, None, degenerate=True))
    assert not level_qualifies(level, rho_std=None, std_cap=0.05)


FAMILY_CONFIG = OracleConfig(
    n_train=300, n_test=900, separation=1.0, n_passes=0, n_members=0, seed=77
)


def test_transition_detected_on_engineered_family():
    family = generate_family(FAMILY_CONFIG, (0.003, 0.3, 0.7), (0, 1, 2))
    report = detect_transition(family, EstimatorId.SOFTMAX_ENTROPY, b=200, seed=5)
    assert report.transition_fraction == 0.3
    assert report.transition_accuracy is not None
    # levels come back ordered by measured accuracy
    accs = [lv.mean_accuracy for lv in report.levels]
    assert accs == sorted(accs)
    starved = next(lv for lv in report.levels if lv.train_fraction == 0.003)
    assert not starved.qualifies


def test_no_level_qualifies_when_all_runs_degenerate():
    # huge separation: every run is all-correct -> DegenerateLabels everywhere
    config = OracleConfig(
        n_train=200, n_test=80, separation=40.0, n_passes=0, n_members=0, seed=7
    )
    family = generate_family(config, (0.5, 1.0), (0, 1))
    report = detect_transition(family, EstimatorId.SOFTMAX_ENTROPY, b=150, seed=1)
    assert report.transition_fraction is None
    assert report.transition_accuracy is None
    assert all(not lv.qualifies for lv in report.levels)
    assert all(s.degenerate for lv in report.levels for s in lv.per_seed_rho)


def test_all_levels_qualify_picks_lowest_accuracy():
    family = generate_family(FAMILY_CONFIG, (0.3, 0.7), (0, 1, 2))
    report = detect_transition(family, EstimatorId.SOFTMAX_ENTROPY, b=200, seed=5)
    if all(lv.qualifies for lv in report.levels):
        assert report.transition_fraction == report.levels[0].train_fraction
        assert report.transition_accuracy == report.levels[0].mean_accuracy


def test_adding_level_above_transition_is_stable():
    base_runs = [generate_run(FAMILY_CONFIG, f, s) for f in (0.003, 0.3) for s in (0, 1, 2)]
    extended_runs = base_runs + [generate_run(FAMILY_CONFIG, 0.7, s) for s in (0, 1, 2)]
    base = detect_transition(
        assemble_family(base_runs), EstimatorId.SOFTMAX_ENTROPY, b=200, seed=5)
    extended = detect_transition(
        assemble_family(extended_runs), EstimatorId.SOFTMAX_ENTROPY, b=200, seed=5)
    assert base.transition_fraction == extended.transition_fraction == 0.3
    # per-run CIs derive from run identity, so existing levels are untouched
    for lv_base, lv_ext in zip(base.levels, extended.levels):
        assert lv_base.train_fraction == lv_ext.train_fraction
        for a, b in zip(lv_base.per_seed_rho, lv_ext.per_seed_rho):
            assert a == b


def test_report_deterministic():
    family = generate_family(FAMILY_CONFIG, (0.3, 0.7), (0, 1))
    a = detect_transition(family, EstimatorId.SOFTMAX_ENTROPY, b=150, seed=9)
    b = detect_transition(family, EstimatorId.SOFTMAX_ENTROPY, b=150, seed=9)
    assert a == b


def test_std_ddof_configurable():
    family = generate_family(FAMILY_CONFIG, (0.7,), (0, 1, 2))
    pop = detect_transition(family, EstimatorId.SOFTMAX_ENTROPY, b=150, seed=2, std_ddof=0)
    samp = detect_transition(family, EstimatorId.SOFTMAX_ENTROPY, b=150, seed=2, std_ddof=1)
    rhos = [s.rho for s in pop.levels[0].per_seed_rho]
    assert pop.levels[0].rho_std == pytest.approx(float(np.std(rhos, ddof=0)))
    assert samp.levels[0].rho_std == pytest.approx(float(np.std(rhos, ddof=1)))
