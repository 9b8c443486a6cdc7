from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uqgate.errors import DegenerateLabels, LengthMismatch
from uqgate.metrics import auroc, auroc_value, midranks, spearman_rho, spearman_value


# --- independent O(n^2) oracles -------------------------------------------------
# Ranks by pair counting (not by sorting), Pearson by direct sums; AUROC by
# explicit enumeration of all (error, correct) pairs.

def counting_midranks(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    less = (x[None, :] < x[:, None]).sum(axis=1)
    equal = (x[None, :] == x[:, None]).sum(axis=1)
    return less + (equal + 1) / 2.0


def brute_spearman(values, errors) -> float:
    rx = counting_midranks(values)
    ry = counting_midranks(errors)
    mx, my = rx.mean(), ry.mean()
    num = float(((rx - mx) * (ry - my)).sum())
    den = math.sqrt(float(((rx - mx) ** 2).sum()) * float(((ry - my) ** 2).sum()))
    return num / den


def brute_auroc(values, errors) -> float:
    values = np.asarray(values, dtype=float)
    errors = np.asarray(errors)
    pos = values[errors != 0]
    neg = values[errors == 0]
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


# --- literal examples ----------------------------------------------------------------

def test_spearman_binary_target_literal():
    values = [0.1, 0.2, 0.3, 0.4]
    errors = [0, 0, 1, 1]
    expected = 2.0 / math.sqrt(5.0)  # mid-rank Pearson worked by hand
    assert spearman_value(values, errors) == pytest.approx(expected, abs=1e-15)
    assert brute_spearman(values, errors) == pytest.approx(expected, abs=1e-15)
    assert round(spearman_value(values, errors), 4) == 0.8944


def test_spearman_antisymmetry_literal():
    values = [0.4, 0.3, 0.2, 0.1]
    assert spearman_value(values, [0, 0, 1, 1]) == pytest.approx(-2.0 / math.sqrt(5.0))


def test_degenerate_labels():
    with pytest.raises(DegenerateLabels):
        spearman_value([0.1, 0.2, 0.3, 0.4], [0, 0, 0, 0])
    with pytest.raises(DegenerateLabels):
        auroc_value([0.1, 0.2], [1, 1])


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        spearman_value([0.1, 0.2], [0, 1, 1])
    with pytest.raises(LengthMismatch):
        auroc_value([0.1], [1])


def test_auroc_perfect_separation():
    assert auroc_value([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0


def test_auroc_all_tied_scores():
    assert auroc_value([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == 0.5


def test_auroc_pair_enumeration_literal():
    # pairs: (0.9,0.1)=1 (0.9,0.5)=1 (0.5,0.1)=1 (0.5,0.5)=0.5 -> 3.5/4
    assert auroc_value([0.9, 0.1, 0.5, 0.5], [1, 0, 1, 0]) == pytest.approx(0.875)


def test_constant_scores_spearman_defined_as_zero():
    assert spearman_value([0.3, 0.3, 0.3], [0, 1, 0]) == 0.0


def test_metric_value_counts():
    mv = spearman_rho([0.1, 0.2, 0.3, 0.4], [0, 1, 0, 1])
    assert mv.n == 4 and mv.n_errors == 2 and mv.name == "spearman_rho"
    av = auroc([0.1, 0.2, 0.3, 0.4], [0, 1, 0, 1])
    assert av.name == "auroc" and 0.0 <= av.value <= 1.0


def test_midranks_ties():
    np.testing.assert_array_equal(midranks(np.array([3.0, 1.0, 3.0, 2.0])), [3.5, 1.0, 3.5, 2.0])


# --- randomized oracle agreement ----------------------------------------------------

def _random_instance(rng, heavy_ties: bool):
    n = int(rng.integers(2, 201))
    if heavy_ties:
        values = rng.choice(rng.normal(size=max(2, n // 8)), size=n)
    else:
        values = rng.normal(size=n)
    errors = np.zeros(n, dtype=int)
    n_err = int(rng.integers(1, n))
    errors[rng.choice(n, size=n_err, replace=False)] = 1
    if len(np.unique(values)) < 2:
        values[0] += 1.0
    return values, errors


def test_oracle_agreement_small_sample():
    rng = np.random.default_rng(123)
    for trial in range(200):
        values, errors = _random_instance(rng, heavy_ties=trial % 2 == 0)
        assert spearman_value(values, errors) == pytest.approx(
            brute_spearman(values, errors), abs=1e-12)
        assert auroc_value(values, errors) == pytest.approx(
            brute_auroc(values, errors), abs=1e-12)


# --- properties -----------------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_invariance_under_increasing_transform(seed):
    rng = np.random.default_rng(seed)
    values, errors = _random_instance(rng, heavy_ties=bool(seed % 2))
    transformed = np.exp(2.0 * values + 1.0)
    assert spearman_value(values, errors) == pytest.approx(
        spearman_value(transformed, errors), abs=1e-9)
    assert auroc_value(values, errors) == pytest.approx(
        auroc_value(transformed, errors), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_auroc_negation_symmetry(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 60))
    values = rng.permutation(np.arange(n, dtype=float))  # tie-free
    errors = np.zeros(n, dtype=int)
    errors[rng.choice(n, size=int(rng.integers(1, n)), replace=False)] = 1
    assert auroc_value(values, errors) + auroc_value(-values, errors) == pytest.approx(1.0)


def test_rho_sign_matches_auroc_side():
    rng = np.random.default_rng(99)
    checked = 0
    for _ in range(300):
        n = int(rng.integers(3, 80))
        values = rng.permutation(np.arange(n, dtype=float))
        errors = np.zeros(n, dtype=int)
        errors[rng.choice(n, size=int(rng.integers(1, n)), replace=False)] = 1
        rho = spearman_value(values, errors)
        auc = auroc_value(values, errors)
        if abs(rho) < 1e-12:
            assert auc == pytest.approx(0.5)
            continue
        assert (rho > 0) == (auc > 0.5)
        checked += 1
    assert checked > 200
