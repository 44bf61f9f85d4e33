"""Exact self-similar incompressible-flow fields and their verification.

The package evaluates the closed-form similarity profiles built on
configurable-precision confluent hypergeometric functions, completes the
remaining profiles numerically, assembles space-time fields, and checks
everything by substituting the fields back into the governing equations
with finite differences.
"""

__version__ = "0.1.0"

from .errors import (
    DegenerateFit,
    DomainError,
    IntegratorFailure,
    NoConvergence,
    OutOfHull,
    PoleError,
    SelfSimFlowError,
)
from .precision import PrecisionConfig

__all__ = [
    "__version__",
    "PrecisionConfig",
    "SelfSimFlowError",
    "PoleError",
    "DomainError",
    "NoConvergence",
    "IntegratorFailure",
    "OutOfHull",
    "DegenerateFit",
]
