from __future__ import annotations

import numpy as np
import pytest

from uqgate.oracle import OracleConfig, generate_run
from uqgate.scores import EstimatorId, ScoreSet


@pytest.fixture(scope="session")
def default_run():
    """A competent run with passes and members (the tuned defaults)."""
    return generate_run(OracleConfig(seed=3), 0.7, 0)


@pytest.fixture(scope="session")
def softmax_run():
    """Same data, single forward pass only (no passes/members)."""
    return generate_run(OracleConfig(seed=3, n_passes=0, n_members=0), 0.7, 0)


def make_scoreset(values, errors, estimator=EstimatorId.SOFTMAX_ENTROPY, ids=None) -> ScoreSet:
    values = np.asarray(values, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.int8)
    if ids is None:
        ids = tuple(f"s{i}" for i in range(len(values)))
    return ScoreSet(estimator=estimator, values=values, errors=errors, sample_ids=tuple(ids))
