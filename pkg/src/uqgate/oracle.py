"""Synthetic temporal-classification runs for desk-scale, end-to-end testing.

Class centroids sit equally spaced on a ring of radius ``separation``
inside a randomly oriented 2-d subspace; class c emits T x D feature
sequences centered on its centroid with unit Gaussian frame noise. The
ring makes each class confusable mainly with its two neighbours, which is
what concentrates probability mass on the top classes and keeps the
softmax-derived scores nearly interchangeable, as they are for trained
networks. The classifier is a nearest-centroid model over temporally
pooled (frame-averaged) features with a squared-distance softmax head,
fitted on a seed-specific subset of the training pool:

* accuracy rises with ``separation`` and ``train_fraction``;
* errors concentrate near decision boundaries, so uncertainty genuinely
  ranks them;
* stochastic passes mask feature entries at ``dropout_rate`` (inverted
  scaling) and re-pool;
* ensemble members refit the centroids on bootstrap resamples of the
  training subset (centroid fitting has no initialization randomness to
  vary instead).

Everything derives from ``(config.seed, train_fraction, model_seed)``, so
runs regenerate bit-identically and the emitted NDJSON is indistinguishable
from an external model's log.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateConfigWarning, ShapeMismatch
from .ingest import RunFamily, RunLog, RunMeta, assemble_family, make_record
from .rng import float_bits, spawn_rng

# seed-derivation path tags
_P_CENTROIDS = 101
_P_SPLIT = 102
_P_MODEL = 103
_P_PASSES = 104

_SPLIT_CODES = {"test": 0, "calibration": 1}


@dataclass(frozen=True)
class OracleConfig:
    k: int = 6
    d: int = 8
    t: int = 4
    n_train: int = 600
    n_test: int = 400
    separation: float = 1.0
    dropout_rate: float = 0.25
    n_passes: int = 30
    n_members: int = 3
    temperature: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValueError("need at least 2 classes")
        if self.d < 2:
            raise ValueError("the centroid ring needs at least 2 feature dimensions")
        if self.t < 1 or self.n_train < 1 or self.n_test < 1:
            raise ValueError("dimensions and sample counts must be positive")
        if self.n_passes != 0 and self.n_passes < 2:
            raise ValueError("n_passes must be 0 (omit passes) or >= 2")
        if self.n_members != 0 and self.n_members < 2:
            raise ValueError("n_members must be 0 (omit members) or >= 2")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be positive")
        if self.separation < 0.0:
            raise ValueError("separation must be non-negative")


@dataclass(frozen=True)
class CentroidModel:
    """Fitted nearest-centroid classifier with a distance-softmax head."""

    class_means: np.ndarray  # (k, d); rows of absent classes are NaN
    present: np.ndarray  # (k,) bool
    member_means: tuple[np.ndarray, ...]
    temperature: float
    dropout_rate: float

    @property
    def k(self) -> int:
        return self.class_means.shape[0]

    def probs(self, pooled: np.ndarray) -> np.ndarray:
        """Class probabilities for pooled features, shape (n, k).

        Classes absent from the training subset get probability zero.
        """
        return self._head(np.atleast_2d(pooled), self.class_means)

    def member_probs(self, pooled: np.ndarray) -> np.ndarray:
        """Per-member class probabilities, shape (n, M, k) for pooled (n, d)."""
        pooled = np.atleast_2d(pooled)
        per_member = [self._head(pooled, means) for means in self.member_means]
        return np.stack(per_member, axis=1)

    def _head(self, pooled: np.ndarray, means: np.ndarray) -> np.ndarray:
        diff = pooled[:, None, :] - np.where(self.present[:, None], means, 0.0)[None, :, :]
        d2 = np.einsum("nkd,nkd->nk", diff, diff)
        logits = -d2 / (2.0 * self.temperature)
        logits[:, ~self.present] = -np.inf
        logits -= logits.max(axis=1, keepdims=True)
        w = np.exp(logits)
        return w / w.sum(axis=1, keepdims=True)

    def predict_record(
        self,
        features: np.ndarray,
        pass_rng: np.random.Generator | None = None,
        n_passes: int = 0,
        include_members: bool = False,
    ) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
        """(probs, mc_passes, members) for one raw T x D sequence.

        Temporal pooling is a frame mean, so variable-length (corrupted)
        sequences are fine. Each stochastic pass masks entries i.i.d. at
        ``dropout_rate`` with inverted scaling, then re-pools.
        """
        features = np.asarray(features, dtype=np.float64)
        pooled = features.mean(axis=0)
        probs = self.probs(pooled)[0]
        passes = None
        if n_passes:
            if pass_rng is None:
                raise ValueError("stochastic passes need a generator")
            keep = 1.0 - self.dropout_rate
            masks = pass_rng.random((n_passes,) + features.shape) >= self.dropout_rate
            masked = features[None, :, :] * masks / keep
            passes = self.probs(masked.mean(axis=1))
        members = self.member_probs(pooled)[0] if include_members and self.member_means else None
        return probs, passes, members


def _centroids(config: OracleConfig) -> np.ndarray:
    rng = spawn_rng(config.seed, _P_CENTROIDS)
    angles = 2.0 * np.pi * np.arange(config.k) / config.k
    ring = np.zeros((config.k, config.d))
    ring[:, 0] = np.cos(angles)
    ring[:, 1 % config.d] = np.sin(angles)
    rotation, _ = np.linalg.qr(rng.normal(size=(config.d, config.d)))
    return config.separation * ring @ rotation.T


def _train_pool(config: OracleConfig) -> tuple[np.ndarray, np.ndarray]:
    """Pooled training features and labels, shared by every run of a config."""
    rng = spawn_rng(config.seed, _P_CENTROIDS, 1)
    labels = rng.integers(0, config.k, size=config.n_train)
    centroids = _centroids(config)
    # frame noise averages to sd 1/sqrt(T) after pooling
    pooled = centroids[labels] + rng.normal(size=(config.n_train, config.t, config.d)).mean(axis=1)
    return pooled, labels


def _split_samples(config: OracleConfig, split: str) -> tuple[np.ndarray, np.ndarray]:
    """Raw sequences and labels for one evaluation split."""
    rng = spawn_rng(config.seed, _P_SPLIT, _SPLIT_CODES[split])
    labels = rng.integers(0, config.k, size=config.n_test)
    centroids = _centroids(config)
    seqs = centroids[labels][:, None, :] + rng.normal(
        size=(config.n_test, config.t, config.d)
    )
    return seqs, labels


def fit_model(
    config: OracleConfig,
    train_fraction: float,
    model_seed: int,
    allowed_classes: Sequence[int] | None = None,
) -> CentroidModel:
    """Fit the centroid classifier on this seed's training subset.

    ``allowed_classes`` restricts the pool to those (original) classes and
    relabels them 0..k'-1, which is how held-out-class models are built.
    """
    pooled, labels = _train_pool(config)
    if allowed_classes is not None:
        allowed = sorted(allowed_classes)
        relabel = {c: i for i, c in enumerate(allowed)}
        mask = np.isin(labels, allowed)
        pooled = pooled[mask]
        labels = np.asarray([relabel[c] for c in labels[mask]])
        k = len(allowed)
        path = (_P_MODEL, model_seed, float_bits(train_fraction), *allowed)
    else:
        k = config.k
        path = (_P_MODEL, model_seed, float_bits(train_fraction))

    if not 0.0 < train_fraction <= 1.0:
        raise ValueError(f"train_fraction must be in (0, 1], got {train_fraction}")
    rng = spawn_rng(config.seed, *path)
    m = max(1, round(train_fraction * len(pooled)))
    subset = rng.choice(len(pooled), size=m, replace=False)

    def class_means(idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        means = np.full((k, config.d), np.nan)
        present = np.zeros(k, dtype=bool)
        for c in range(k):
            rows = idx[labels[idx] == c]
            if rows.size:
                means[c] = pooled[rows].mean(axis=0)
                present[c] = True
        return means, present

    means, present = class_means(subset)
    members = []
    for _ in range(config.n_members):
        boot = subset[rng.integers(0, m, size=m)]
        member_means, member_present = class_means(boot)
        # a bootstrap can lose a class the subset had; fall back to the
        # subset mean so member probabilities stay over the same support
        member_means = np.where(member_present[:, None], member_means, means)
        members.append(member_means)
    return CentroidModel(
        class_means=means,
        present=present,
        member_means=tuple(members),
        temperature=config.temperature,
        dropout_rate=config.dropout_rate,
    )


def _batched_outputs(
    model: CentroidModel,
    config: OracleConfig,
    seqs: np.ndarray,
    pass_rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
    """Probabilities, passes, and members for all records in one shot."""
    n = seqs.shape[0]
    pooled = seqs.mean(axis=1)
    probs_all = model.probs(pooled)
    passes_all = None
    if config.n_passes:
        keep = 1.0 - config.dropout_rate
        masks = pass_rng.random((n, config.n_passes) + seqs.shape[1:]) >= config.dropout_rate
        pooled_passes = (seqs[:, None, :, :] * masks / keep).mean(axis=2)
        passes_all = model.probs(pooled_passes.reshape(-1, config.d)).reshape(
            n, config.n_passes, model.k
        )
    members_all = model.member_probs(pooled) if config.n_members else None
    return probs_all, passes_all, members_all


def generate_run(
    config: OracleConfig,
    train_fraction: float,
    model_seed: int,
    split: str = "test",
    include_features: bool = True,
    dataset_name: str | None = None,
) -> RunLog:
    """One fully validated synthetic run log."""
    if split not in _SPLIT_CODES:
        raise ValueError(f"split must be one of {sorted(_SPLIT_CODES)}, got {split!r}")
    if config.separation == 0.0:
        warnings.warn(
            "separation 0 makes every class centroid identical; accuracy is chance-level",
            DegenerateConfigWarning,
            stacklevel=2,
        )
    model = fit_model(config, train_fraction, model_seed)
    seqs, labels = _split_samples(config, split)
    pass_rng = spawn_rng(
        config.seed, _P_PASSES, model_seed, float_bits(train_fraction), _SPLIT_CODES[split]
    )
    probs_all, passes_all, members_all = _batched_outputs(model, config, seqs, pass_rng)
    records = []
    for i in range(config.n_test):
        records.append(
            make_record(
                sample_id=f"{split}-{i:05d}",
                probs=probs_all[i],
                label=int(labels[i]),
                k=config.k,
                mc_passes=passes_all[i] if passes_all is not None else None,
                ensemble_members=members_all[i] if members_all is not None else None,
                features=seqs[i] if include_features else None,
            )
        )
    meta = RunMeta(
        model_seed=model_seed,
        train_fraction=train_fraction,
        split=split,
        dataset_name=dataset_name or f"synthetic-k{config.k}-seed{config.seed}",
        k=config.k,
    )
    return RunLog(records=tuple(records), meta=meta)


def generate_family(
    config: OracleConfig, fractions: Sequence[float], seeds: Sequence[int]
) -> RunFamily:
    """One run per (fraction, seed); fractions must come sorted ascending."""
    if list(fractions) != sorted(fractions):
        raise ValueError("fractions must be sorted ascending")
    return assemble_family(
        generate_run(config, fraction, seed)
        for fraction in fractions
        for seed in seeds
    )


def generate_ood_run(
    config: OracleConfig,
    holdout_classes: Sequence[int],
    train_fraction: float = 1.0,
    model_seed: int = 0,
    split: str = "test",
    include_features: bool = True,
) -> RunLog:
    """A run whose model never saw ``holdout_classes``.

    Samples from held-out classes are emitted with label -1 and the OOD
    flag; known-class samples are relabeled to the model's 0..k'-1 space.
    The log's class count is k' = k - len(holdout).
    """
    holdout = sorted(set(int(c) for c in holdout_classes))
    if any(c < 0 or c >= config.k for c in holdout):
        raise ValueError(f"holdout classes must lie in [0, {config.k})")
    known = [c for c in range(config.k) if c not in holdout]
    if len(known) < 2:
        raise ValueError("need at least 2 known classes after holdout")
    relabel = {c: i for i, c in enumerate(known)}

    model = fit_model(config, train_fraction, model_seed, allowed_classes=known)
    seqs, labels = _split_samples(config, split)
    pass_rng = spawn_rng(
        config.seed, _P_PASSES, model_seed, float_bits(train_fraction), _SPLIT_CODES[split], 1
    )
    probs_all, passes_all, members_all = _batched_outputs(model, config, seqs, pass_rng)
    records = []
    for i in range(config.n_test):
        is_ood = int(labels[i]) in holdout
        records.append(
            make_record(
                sample_id=f"{split}-{i:05d}",
                probs=probs_all[i],
                label=-1 if is_ood else relabel[int(labels[i])],
                k=len(known),
                mc_passes=passes_all[i] if passes_all is not None else None,
                ensemble_members=members_all[i] if members_all is not None else None,
                features=seqs[i] if include_features else None,
                ood_flag=is_ood,
            )
        )
    meta = RunMeta(
        model_seed=model_seed,
        train_fraction=train_fraction,
        split=split,
        dataset_name=f"synthetic-ood-k{config.k}-holdout{len(holdout)}-seed{config.seed}",
        k=len(known),
    )
    return RunLog(records=tuple(records), meta=meta)


def rescore_log(
    log: RunLog,
    model: CentroidModel,
    seed: int = 0,
    n_passes: int = 0,
    include_members: bool = False,
) -> RunLog:
    """Re-run the model on each record's (possibly corrupted) features.

    Labels, ids, flags, and features are preserved; probabilities, passes,
    and members are replaced. Record i's pass masks derive from (seed, i).
    """
    if model.k != log.meta.k:
        raise ShapeMismatch(f"model has {model.k} classes, log has {log.meta.k}")
    records = []
    for i, rec in enumerate(log.records):
        if rec.features is None:
            raise ShapeMismatch(f"record {rec.sample_id!r} carries no features to re-score")
        probs, passes, members = model.predict_record(
            rec.features,
            pass_rng=spawn_rng(seed, i),
            n_passes=n_passes,
            include_members=include_members,
        )
        records.append(
            make_record(
                sample_id=rec.sample_id,
                probs=probs,
                label=rec.label,
                k=log.meta.k,
                mc_passes=passes,
                ensemble_members=members,
                features=rec.features,
                ood_flag=rec.ood_flag,
            )
        )
    return RunLog(records=tuple(records), meta=log.meta)
