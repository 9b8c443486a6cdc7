"""uqgate: decision-centric evaluation of uncertainty scores for
threshold-gated autonomy.

Scores prediction logs with seven uncertainty estimators, tests whether
estimators are operationally interchangeable (paired bootstrap equivalence
plus act/defer agreement), calibrates and optimizes execution thresholds,
detects competence regimes across run families, stress-tests under temporal
corruption and held-out-class OOD, and propagates act/defer decisions
through a stylized embodied consequence simulation.
"""

__version__ = "0.1.0"

from .errors import UQGateError  # noqa: F401
