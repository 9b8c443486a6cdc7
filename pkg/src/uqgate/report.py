"""Report assembly: canonical JSON, schema validation, atomic file output.

The canonical form fixes key order (sorted), float formatting (17
significant digits), and separators, so identical analyses produce
byte-identical reports. Undefined values (e.g. risk with nothing executed)
are ``null``, never NaN.
"""

from __future__ import annotations

import json
import time
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Sequence

import jsonschema
import numpy as np

from . import __version__
from .gating import RiskCoveragePoint
from .ingest import RunLog
from .resampling import BootstrapCI
from .util import atomic_write_text

TOOL_NAME = "uqgate"


def _float_repr(x: float) -> str:
    if not np.isfinite(x):
        raise ValueError(f"reports must not contain non-finite numbers (got {x!r})")
    return format(float(x), ".17g")


def canonical_json(obj: Any) -> str:
    """Serialize with sorted keys and fixed float formatting (no whitespace)."""
    parts: list[str] = []
    _emit(obj, parts)
    return "".join(parts)


def _emit(obj: Any, parts: list[str]) -> None:
    if obj is None:
        parts.append("null")
    elif isinstance(obj, bool) or isinstance(obj, np.bool_):
        parts.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        parts.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        parts.append(_float_repr(float(obj)))
    elif isinstance(obj, str):
        parts.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        parts.append("{")
        for i, key in enumerate(sorted(obj)):
            if not isinstance(key, str):
                raise TypeError(f"report keys must be strings, got {key!r}")
            if i:
                parts.append(",")
            parts.append(json.dumps(key, ensure_ascii=False))
            parts.append(":")
            _emit(obj[key], parts)
        parts.append("}")
    elif isinstance(obj, (list, tuple)):
        parts.append("[")
        for i, item in enumerate(obj):
            if i:
                parts.append(",")
            _emit(item, parts)
        parts.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} into a report")


def load_schema() -> dict:
    text = resources.files("uqgate").joinpath("schema/gate_report.schema.json").read_text()
    return json.loads(text)


def validate_report(report: dict) -> None:
    jsonschema.validate(report, load_schema())


def write_report(report: dict, path: str | Path) -> None:
    validate_report(report)
    atomic_write_text(path, canonical_json(report) + "\n")


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for value in row:
            if value is None:
                cells.append("")
            elif isinstance(value, (float, np.floating)):
                cells.append(_float_repr(float(value)))
            else:
                cells.append(str(value))
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def make_envelope(command: str, seed: int, deterministic: bool, config: dict) -> dict:
    report = {
        "tool": TOOL_NAME,
        "tool_version": __version__,
        "command": command,
        "seed": int(seed),
        "deterministic": bool(deterministic),
        "config": config,
        "inputs": [],
        "warnings": [],
        "artifacts": [],
        "sections": {},
    }
    if not deterministic:
        report["generated_at"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    return report


def describe_log(path: str | None, log: RunLog) -> dict:
    return {
        "path": path,
        "dataset": log.meta.dataset_name,
        "split": log.meta.split,
        "k": log.meta.k,
        "n_records": len(log),
        "model_seed": log.meta.model_seed,
        "train_fraction": log.meta.train_fraction,
    }


def ci_dict(ci: BootstrapCI) -> dict:
    return {
        "point": ci.point,
        "lo": ci.lo,
        "hi": ci.hi,
        "level": ci.level,
        "b": ci.b,
        "seed": ci.seed,
        "skipped": ci.skipped,
    }


def rc_point_dict(p: RiskCoveragePoint) -> dict:
    return {
        "tau": p.tau,
        "coverage": p.coverage,
        "risk": p.risk,
        "executed_errors": p.executed_errors,
        "executed": p.executed,
        "n": p.n,
    }
