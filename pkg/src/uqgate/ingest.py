"""Prediction-log parsing, validation, and run grouping.

Canonical format is NDJSON: one metadata line followed by one record per
line. A wide CSV importer is provided as a convenience; it carries
probabilities, passes, and members but not feature sequences.

NDJSON layout (UTF-8, LF)::

    {"k": 3, "model_seed": 0, "train_fraction": 0.7, "split": "test", "dataset": "name"}
    {"id": "s0", "probs": [0.7, 0.2, 0.1], "label": 1}
    {"id": "s1", "probs": [...], "label": -1, "ood": true, "features": [[...]]}

Optional record fields (``mc_passes``, ``ensemble``, ``features``, ``ood``)
are omitted when absent, never null.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DuplicateRun,
    DuplicateSampleId,
    EmptyLog,
    InvalidLabel,
    ShapeMismatch,
    SimplexViolation,
)
from .util import atomic_write_text

# Rows are accepted untouched when |sum - 1| <= EXACT_TOL, renormalized when
# within RENORM_TOL (float-printing loss from external exporters), rejected
# beyond that.
EXACT_TOL = 1e-6
RENORM_TOL = 1e-3

SPLITS = ("calibration", "test")


@dataclass(frozen=True, eq=False)
class PredictionRecord:
    """One test sample: probability vector(s), label, optional extras."""

    sample_id: str
    probs: np.ndarray  # (K,)
    label: int
    mc_passes: np.ndarray | None = None  # (T, K)
    ensemble_members: np.ndarray | None = None  # (M, K)
    features: np.ndarray | None = None  # (T_f, D)
    ood_flag: bool = False

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PredictionRecord):
            return NotImplemented
        return (
            self.sample_id == other.sample_id
            and self.label == other.label
            and self.ood_flag == other.ood_flag
            and np.array_equal(self.probs, other.probs)
            and _opt_equal(self.mc_passes, other.mc_passes)
            and _opt_equal(self.ensemble_members, other.ensemble_members)
            and _opt_equal(self.features, other.features)
        )


def _opt_equal(a: np.ndarray | None, b: np.ndarray | None) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return np.array_equal(a, b)


@dataclass(frozen=True)
class RunMeta:
    model_seed: int
    train_fraction: float
    split: str
    dataset_name: str
    k: int

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ShapeMismatch(f"need at least 2 classes, got k={self.k}")
        if not (0.0 < self.train_fraction <= 1.0):
            raise ShapeMismatch(f"train_fraction must be in (0, 1], got {self.train_fraction}")
        if self.split not in SPLITS:
            raise ShapeMismatch(f"split must be one of {SPLITS}, got {self.split!r}")


@dataclass(frozen=True, eq=False)
class RunLog:
    """A validated, ordered set of prediction records plus run metadata."""

    records: tuple[PredictionRecord, ...]
    meta: RunMeta

    def __post_init__(self) -> None:
        if not self.records:
            raise EmptyLog("log contains no records")
        seen: set[str] = set()
        for rec in self.records:
            if rec.sample_id in seen:
                raise DuplicateSampleId(f"sample id {rec.sample_id!r} appears twice")
            seen.add(rec.sample_id)
            if rec.probs.shape != (self.meta.k,):
                raise ShapeMismatch(
                    f"record {rec.sample_id!r} has {rec.probs.shape[0]} classes, log has k={self.meta.k}"
                )

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RunLog):
            return NotImplemented
        return self.meta == other.meta and self.records == other.records

    @property
    def k(self) -> int:
        return self.meta.k


@dataclass(frozen=True)
class FamilyLevel:
    train_fraction: float
    runs: tuple[RunLog, ...]  # ascending model_seed


@dataclass(frozen=True)
class RunFamily:
    """Runs grouped by train fraction, each level holding distinct seeds."""

    levels: tuple[FamilyLevel, ...]  # ascending train_fraction

    def all_runs(self) -> tuple[RunLog, ...]:
        return tuple(run for level in self.levels for run in level.runs)


def _check_simplex(row: Sequence[float], what: str, sample_id: str) -> np.ndarray:
    arr = np.asarray(row, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeMismatch(f"{what} of record {sample_id!r} is not a vector")
    if not np.all(np.isfinite(arr)):
        raise SimplexViolation(f"{what} of record {sample_id!r} has non-finite entries")
    if np.any(arr < 0.0):
        raise SimplexViolation(f"{what} of record {sample_id!r} has a negative entry")
    total = float(arr.sum())
    if abs(total - 1.0) <= EXACT_TOL:
        return arr
    if abs(total - 1.0) <= RENORM_TOL:
        return arr / total
    raise SimplexViolation(
        f"{what} of record {sample_id!r} sums to {total:.6f}, outside tolerance {RENORM_TOL}"
    )


def _check_prob_matrix(rows: Sequence[Sequence[float]], k: int, what: str, sample_id: str) -> np.ndarray:
    out = np.empty((len(rows), k), dtype=np.float64)
    for i, row in enumerate(rows):
        checked = _check_simplex(row, f"{what}[{i}]", sample_id)
        if checked.shape[0] != k:
            raise ShapeMismatch(
                f"{what}[{i}] of record {sample_id!r} has {checked.shape[0]} classes, expected {k}"
            )
        out[i] = checked
    return out


def make_record(
    sample_id: str,
    probs: Sequence[float],
    label: int,
    k: int,
    mc_passes: Sequence[Sequence[float]] | None = None,
    ensemble_members: Sequence[Sequence[float]] | None = None,
    features: Sequence[Sequence[float]] | None = None,
    ood_flag: bool = False,
) -> PredictionRecord:
    """Validate raw field values and build an immutable record.

    Enforces the simplex constraint on every probability row, the class
    count ``k``, and the OOD/label consistency rule (``ood_flag`` iff
    ``label == -1``).
    """
    probs_arr = _check_simplex(probs, "probs", sample_id)
    if probs_arr.shape[0] != k:
        raise ShapeMismatch(
            f"record {sample_id!r} has {probs_arr.shape[0]} classes, expected {k}"
        )
    if ood_flag != (label == -1):
        raise InvalidLabel(
            f"record {sample_id!r}: ood={ood_flag} requires label -1 (got {label})"
            if ood_flag
            else f"record {sample_id!r}: label -1 requires ood=true"
        )
    if not ood_flag and not (0 <= label < k):
        raise InvalidLabel(f"record {sample_id!r}: label {label} outside [0, {k})")

    passes = None if mc_passes is None else _check_prob_matrix(mc_passes, k, "mc_passes", sample_id)
    members = (
        None
        if ensemble_members is None
        else _check_prob_matrix(ensemble_members, k, "ensemble", sample_id)
    )
    feats = None
    if features is not None:
        feats = np.asarray(features, dtype=np.float64)
        if feats.ndim != 2:
            raise ShapeMismatch(f"features of record {sample_id!r} must be a T x D matrix")
    return PredictionRecord(
        sample_id=str(sample_id),
        probs=probs_arr,
        label=int(label),
        mc_passes=passes,
        ensemble_members=members,
        features=feats,
        ood_flag=bool(ood_flag),
    )


# --- NDJSON -------------------------------------------------------------------

def parse_prediction_log(data: bytes | str, fmt: str = "ndjson") -> RunLog:
    """Parse a byte/str stream in the declared format into a validated RunLog.

    Total and deterministic: the same bytes always yield the same RunLog or
    the same error.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    if fmt == "ndjson":
        return _parse_ndjson(data)
    if fmt == "csv":
        return _parse_csv(data)
    raise ValueError(f"unknown log format {fmt!r}")


def _parse_meta(obj: dict) -> RunMeta:
    try:
        return RunMeta(
            model_seed=int(obj["model_seed"]),
            train_fraction=float(obj["train_fraction"]),
            split=str(obj["split"]),
            dataset_name=str(obj.get("dataset", "")),
            k=int(obj["k"]),
        )
    except KeyError as exc:
        raise ShapeMismatch(f"metadata line missing field {exc.args[0]!r}") from None


def _parse_ndjson(text: str) -> RunLog:
    lines = [line for line in text.split("\n") if line.strip()]
    if not lines:
        raise EmptyLog("empty stream")
    try:
        meta_obj = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ShapeMismatch(f"metadata line is not valid JSON: {exc}") from None
    meta = _parse_meta(meta_obj)
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ShapeMismatch(f"line {lineno} is not valid JSON: {exc}") from None
        if "id" not in obj or "probs" not in obj or "label" not in obj:
            raise ShapeMismatch(f"line {lineno} missing one of id/probs/label")
        records.append(
            make_record(
                sample_id=obj["id"],
                probs=obj["probs"],
                label=obj["label"],
                k=meta.k,
                mc_passes=obj.get("mc_passes"),
                ensemble_members=obj.get("ensemble"),
                features=obj.get("features"),
                ood_flag=obj.get("ood", False),
            )
        )
    if not records:
        raise EmptyLog("log contains no records")
    return RunLog(records=tuple(records), meta=meta)


def dump_ndjson(log: RunLog) -> str:
    """Serialize back to NDJSON. Round-trips exactly (floats via repr)."""
    meta = log.meta
    out = [
        json.dumps(
            {
                "k": meta.k,
                "model_seed": meta.model_seed,
                "train_fraction": meta.train_fraction,
                "split": meta.split,
                "dataset": meta.dataset_name,
            }
        )
    ]
    for rec in log.records:
        obj: dict = {"id": rec.sample_id, "probs": rec.probs.tolist(), "label": rec.label}
        if rec.mc_passes is not None:
            obj["mc_passes"] = rec.mc_passes.tolist()
        if rec.ensemble_members is not None:
            obj["ensemble"] = rec.ensemble_members.tolist()
        if rec.features is not None:
            obj["features"] = rec.features.tolist()
        if rec.ood_flag:
            obj["ood"] = True
        out.append(json.dumps(obj))
    return "\n".join(out) + "\n"


# --- CSV convenience importer ---------------------------------------------------

_PASS_COL = re.compile(r"^pass_(\d+)_(\d+)$")
_MEMBER_COL = re.compile(r"^member_(\d+)_(\d+)$")


def _parse_csv(text: str) -> RunLog:
    lines = text.splitlines()
    if not lines:
        raise EmptyLog("empty stream")
    first = lines[0].strip()
    if not first.startswith("#"):
        raise ShapeMismatch("CSV log must start with a '# {json metadata}' line")
    try:
        meta = _parse_meta(json.loads(first.lstrip("#").strip()))
    except json.JSONDecodeError as exc:
        raise ShapeMismatch(f"CSV metadata line is not valid JSON: {exc}") from None

    reader = csv.DictReader(io.StringIO("\n".join(lines[1:])))
    if reader.fieldnames is None:
        raise EmptyLog("CSV log has no header row")
    prob_cols = [f"p_{i}" for i in range(meta.k)]
    for col in ("id", "label", *prob_cols):
        if col not in reader.fieldnames:
            raise ShapeMismatch(f"CSV log missing column {col!r}")
    pass_cols = sorted(
        ((m.group(1), m.group(2), c) for c in reader.fieldnames if (m := _PASS_COL.match(c))),
        key=lambda t: (int(t[0]), int(t[1])),
    )
    member_cols = sorted(
        ((m.group(1), m.group(2), c) for c in reader.fieldnames if (m := _MEMBER_COL.match(c))),
        key=lambda t: (int(t[0]), int(t[1])),
    )

    records = []
    for row in reader:
        sample_id = row["id"]
        probs = [float(row[c]) for c in prob_cols]
        passes = _collect_wide(row, pass_cols, meta.k, "pass", sample_id)
        members = _collect_wide(row, member_cols, meta.k, "member", sample_id)
        ood = row.get("ood", "").strip().lower() in ("1", "true")
        records.append(
            make_record(
                sample_id=sample_id,
                probs=probs,
                label=int(row["label"]),
                k=meta.k,
                mc_passes=passes,
                ensemble_members=members,
                ood_flag=ood,
            )
        )
    if not records:
        raise EmptyLog("CSV log contains no records")
    return RunLog(records=tuple(records), meta=meta)


def _collect_wide(row, cols, k: int, what: str, sample_id: str):
    if not cols:
        return None
    n_rows = max(int(t[0]) for t in cols) + 1
    if len(cols) != n_rows * k:
        raise ShapeMismatch(
            f"record {sample_id!r}: expected {n_rows * k} {what} columns, found {len(cols)}"
        )
    out = [[0.0] * k for _ in range(n_rows)]
    for t, kk, col in cols:
        out[int(t)][int(kk)] = float(row[col])
    return out


# --- file IO ---------------------------------------------------------------------

def load_log(path: str | Path) -> RunLog:
    """Read a log file, inferring the format from the suffix (.csv vs NDJSON)."""
    path = Path(path)
    fmt = "csv" if path.suffix.lower() == ".csv" else "ndjson"
    return parse_prediction_log(path.read_bytes(), fmt=fmt)


def save_log(log: RunLog, path: str | Path) -> None:
    atomic_write_text(path, dump_ndjson(log))


# --- family assembly ----------------------------------------------------------------

def assemble_family(logs: Iterable[RunLog]) -> RunFamily:
    """Group runs by train fraction, ascending fraction then ascending seed."""
    by_key: dict[tuple[float, int], RunLog] = {}
    for log in logs:
        key = (log.meta.train_fraction, log.meta.model_seed)
        if key in by_key:
            raise DuplicateRun(
                f"two runs with train_fraction={key[0]} and model_seed={key[1]}"
            )
        by_key[key] = log
    if not by_key:
        raise EmptyLog("no runs to assemble")
    fractions = sorted({f for f, _ in by_key})
    levels = []
    for fraction in fractions:
        seeds = sorted(s for f, s in by_key if f == fraction)
        levels.append(
            FamilyLevel(
                train_fraction=fraction,
                runs=tuple(by_key[(fraction, s)] for s in seeds),
            )
        )
    return RunFamily(levels=tuple(levels))
