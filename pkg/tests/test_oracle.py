from __future__ import annotations

import numpy as np
import pytest

from uqgate.errors import DegenerateConfigWarning
from uqgate.metrics import spearman_value
from uqgate.oracle import (
    OracleConfig,
    fit_model,
    generate_family,
    generate_ood_run,
    generate_run,
    rescore_log,
)
from uqgate.robustness import CorruptionKind, CorruptionSpec, corrupt_log
from uqgate.scores import EstimatorId, score_run


def accuracy(log, estimator=EstimatorId.SOFTMAX_ENTROPY) -> float:
    ss = score_run(log, estimator)
    return 1.0 - float(np.mean(ss.errors != 0))


def test_generation_is_deterministic():
    config = OracleConfig(seed=13, n_test=50, n_train=100)
    assert generate_run(config, 0.5, 2) == generate_run(config, 0.5, 2)


def test_splits_differ_but_share_the_model():
    config = OracleConfig(seed=13, n_test=50, n_train=100, n_passes=0, n_members=0)
    test = generate_run(config, 0.5, 2, split="test")
    calib = generate_run(config, 0.5, 2, split="calibration")
    assert test.meta.split == "test" and calib.meta.split == "calibration"
    assert not np.array_equal(test.records[0].features, calib.records[0].features)


def test_records_satisfy_simplex_invariants():
    log = generate_run(OracleConfig(seed=2, n_test=30, n_train=80), 0.7, 0)
    for rec in log.records:
        assert abs(rec.probs.sum() - 1.0) <= 1e-6
        assert np.all(rec.probs >= 0.0)
        assert rec.mc_passes.shape == (30, log.k)
        assert rec.ensemble_members.shape == (3, log.k)
        np.testing.assert_allclose(rec.mc_passes.sum(axis=1), 1.0, atol=1e-6)


def test_zero_separation_is_chance_level():
    config = OracleConfig(seed=5, separation=0.0, n_test=400, n_train=300,
                          n_passes=0, n_members=0)
    with pytest.warns(DegenerateConfigWarning):
        log = generate_run(config, 1.0, 0)
    p_chance = 1.0 / config.k
    band = 3.0 * np.sqrt(p_chance * (1 - p_chance) / config.n_test)
    assert abs(accuracy(log) - p_chance) <= band


def test_large_separation_is_near_perfect():
    config = OracleConfig(seed=5, separation=10.0, n_test=300, n_train=300,
                          n_passes=0, n_members=0)
    assert accuracy(generate_run(config, 1.0, 0)) >= 0.99


def test_default_config_lands_in_competent_band():
    accs = [accuracy(generate_run(OracleConfig(seed=3, n_passes=0, n_members=0), 0.7, s))
            for s in (0, 1, 2)]
    assert 0.55 <= float(np.mean(accs)) <= 0.75


def test_family_layout_and_monotone_accuracy():
    config = OracleConfig(seed=11, n_test=250, n_train=300, n_passes=0, n_members=0)
    fractions = (0.05, 0.1, 0.2, 0.4, 0.7)
    family = generate_family(config, fractions, (0, 1, 2))
    assert len(family.all_runs()) == 15
    assert [lv.train_fraction for lv in family.levels] == list(fractions)
    mean_acc = {
        lv.train_fraction: float(np.mean([accuracy(run) for run in lv.runs]))
        for lv in family.levels
    }
    assert mean_acc[0.7] >= mean_acc[0.05]


def test_family_rejects_unsorted_fractions():
    with pytest.raises(ValueError):
        generate_family(OracleConfig(seed=1), (0.7, 0.1), (0,))


def test_single_fraction_single_seed_family():
    config = OracleConfig(seed=11, n_test=30, n_train=60)
    family = generate_family(config, (0.5,), (4,))
    assert len(family.all_runs()) == 1


def test_higher_dropout_raises_epistemic_variance():
    means = {}
    for rate in (0.1, 0.3, 0.5):
        values = []
        for seed in (1, 2, 3):
            config = OracleConfig(seed=seed, n_test=120, n_train=200,
                                  dropout_rate=rate, n_passes=20, n_members=0)
            ss = score_run(generate_run(config, 0.7, 0), EstimatorId.MC_EPISTEMIC_VARIANCE)
            values.append(float(ss.values.mean()))
        means[rate] = float(np.mean(values))
    assert means[0.1] < means[0.3] < means[0.5]


def test_dropout_corruption_raises_mean_uncertainty_with_severity():
    trend = []
    for seed in (1, 2, 3):
        config = OracleConfig(seed=seed, n_test=200, n_train=300, t=10,
                              n_passes=0, n_members=0)
        model = fit_model(config, 0.7, 0)
        clean = generate_run(config, 0.7, 0)
        row = []
        for severity in range(1, 6):
            spec = CorruptionSpec(CorruptionKind.FRAME_DROPOUT, severity, seed=40 + severity)
            shifted = rescore_log(corrupt_log(clean, spec), model, seed=severity)
            row.append(float(score_run(shifted, EstimatorId.SOFTMAX_ENTROPY).values.mean()))
        trend.append(row)
    mean_trend = np.mean(trend, axis=0)
    assert all(a <= b + 1e-12 for a, b in zip(mean_trend, mean_trend[1:]))


def test_ood_run_shape_and_flags():
    config = OracleConfig(seed=8, n_test=120, n_train=240)
    log = generate_ood_run(config, holdout_classes=[1, 4], train_fraction=1.0, model_seed=0)
    assert log.k == config.k - 2
    n_ood = sum(1 for r in log.records if r.ood_flag)
    assert 0 < n_ood < len(log)
    for rec in log.records:
        assert rec.ood_flag == (rec.label == -1)
        assert rec.probs.shape == (config.k - 2,)


def test_ood_run_rejects_bad_holdout():
    config = OracleConfig(seed=8, k=4)
    with pytest.raises(ValueError):
        generate_ood_run(config, holdout_classes=[9], train_fraction=1.0, model_seed=0)
    with pytest.raises(ValueError):
        generate_ood_run(config, holdout_classes=[0, 1, 2], train_fraction=1.0, model_seed=0)


def test_rescore_preserves_probs_on_clean_features():
    config = OracleConfig(seed=19, n_test=40, n_train=120, n_passes=0, n_members=0)
    log = generate_run(config, 0.7, 1)
    model = fit_model(config, 0.7, 1)
    again = rescore_log(log, model, seed=0)
    for a, b in zip(log.records, again.records):
        np.testing.assert_allclose(a.probs, b.probs, atol=1e-12)


def test_errors_track_margin_signal(default_run):
    ss = score_run(default_run, EstimatorId.SOFTMAX_MARGIN)
    assert spearman_value(ss.values, ss.errors) > 0.15
