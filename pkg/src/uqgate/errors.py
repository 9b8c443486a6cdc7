"""Exception types shared across the package.

Every error raised by uqgate derives from :class:`UQGateError`, so callers
can catch one base class at CLI or pipeline boundaries.
"""

from __future__ import annotations


class UQGateError(Exception):
    """Base class for all uqgate errors."""


# --- log ingestion ---------------------------------------------------------

class SimplexViolation(UQGateError):
    """A probability row has a negative/non-finite entry or sums too far from 1."""


class ShapeMismatch(UQGateError):
    """Inconsistent class count or matrix shape within a log."""


class DuplicateSampleId(UQGateError):
    """Two records in one log share a sample id."""


class EmptyLog(UQGateError):
    """A log contains no records."""


class InvalidLabel(UQGateError):
    """Label outside [0, K) without the OOD flag, or flag/label disagreement."""


class DuplicateRun(UQGateError):
    """Two runs with the same (train_fraction, model_seed) in one family."""


# --- scoring ----------------------------------------------------------------

class MissingPasses(UQGateError):
    """Estimator requires stochastic passes absent from the record."""


class MissingMembers(UQGateError):
    """Estimator requires ensemble members absent from the record."""


# --- ranking metrics ---------------------------------------------------------

class DegenerateLabels(UQGateError):
    """Error indicator is all-zero or all-one; ranking metric undefined."""


class LengthMismatch(UQGateError):
    """Paired vectors have different lengths."""


# --- resampling ---------------------------------------------------------------

class StatisticUndefined(UQGateError):
    """Statistic undefined on a resample (and on every redraw attempt)."""


class AlignmentMismatch(UQGateError):
    """Paired score sets are not aligned to the same samples."""


# --- gating / robustness / simulation ----------------------------------------

class EmptyScores(UQGateError):
    """Operation requires at least one score."""


class TooShort(UQGateError):
    """Feature sequence too short to corrupt (or corruption would empty it)."""


class UnreachableAutonomy(UQGateError):
    """Requested realized autonomy not achievable within tolerance.

    Carries the nearest achievable value so callers can report it.
    """

    def __init__(self, target: float, nearest: float, tolerance: float):
        self.target = target
        self.nearest = nearest
        self.tolerance = tolerance
        super().__init__(
            f"target autonomy {target:.4f} unreachable within +/-{tolerance:.4f}; "
            f"nearest achievable is {nearest:.4f}"
        )


# --- synthetic oracle ----------------------------------------------------------

class DegenerateConfigWarning(UserWarning):
    """Generator configuration can only produce chance-level accuracy."""
