"""Small shared helpers."""

from __future__ import annotations

import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")

# ceil/floor of fraction*count guarded against float-representation drift
# (e.g. 0.2 * 5 == 1.0000000000000002).
_GRID_EPS = 1e-9


def safe_ceil(x: float) -> int:
    return int(math.ceil(x - _GRID_EPS))


def safe_floor(x: float) -> int:
    return int(math.floor(x + _GRID_EPS))


def chunked_map(fn: Callable[[int], T], n: int, workers: int = 1) -> list[T]:
    """Apply ``fn`` to 0..n-1, optionally on a thread pool.

    Results are returned in index order regardless of schedule, so the
    output is identical for any worker count (fn must be index-pure).
    """
    if workers <= 1 or n <= 1:
        return [fn(i) for i in range(n)]
    out: list[T] = [None] * n  # type: ignore[list-item]
    chunk = max(1, -(-n // workers))

    def run(start: int) -> None:
        for i in range(start, min(start + chunk, n)):
            out[i] = fn(i)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(run, range(0, n, chunk)))
    return out


def parse_float_list(text: str | Sequence[float]) -> tuple[float, ...]:
    """Accept '0.5,0.6' style CLI strings or an already-parsed sequence."""
    if isinstance(text, str):
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    return tuple(float(v) for v in text)


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via temp file + rename so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
