"""Exceptions and warnings raised by the profiling pipeline.

Every failure carries a stable machine-readable ``code`` so the CLI and the
JSON report can surface it without parsing messages.
"""

from __future__ import annotations

import warnings
from typing import Any

__all__ = [
    "ProfilingError",
    "EmptyDataError",
    "DegenerateInstrumentError",
    "MonotonicityViolationError",
    "GradientUndefinedError",
    "InsufficientDataError",
    "InvalidCovarianceError",
    "BootstrapDegenerateError",
    "DGPRejectionOverflowError",
    "EmptyStratumError",
    "InputError",
    "ReportIntegrityError",
    "ProfilingWarning",
    "warn",
]


class ProfilingError(Exception):
    """Base class; subclasses set ``code``."""

    code = "profiling-error"

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.details = details

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"code": self.code, "message": str(self)}
        if self.details:
            out["details"] = self.details
        return out


class EmptyDataError(ProfilingError):
    code = "empty-data"


class DegenerateInstrumentError(ProfilingError):
    code = "degenerate-instrument"


class MonotonicityViolationError(ProfilingError):
    """Estimated complier share is not positive.

    ``shares`` holds the offending ``(pi_nt, pi_at, pi_co)`` so callers can
    report them.
    """

    code = "monotonicity-or-relevance-violation"

    def __init__(self, message: str, shares: tuple[float, float, float]) -> None:
        super().__init__(message, shares=list(shares))
        self.shares = shares


class GradientUndefinedError(ProfilingError):
    code = "gradient-undefined"


class InsufficientDataError(ProfilingError):
    code = "insufficient-data"


class InvalidCovarianceError(ProfilingError):
    code = "invalid-covariance"


class BootstrapDegenerateError(ProfilingError):
    code = "bootstrap-degenerate"


class DGPRejectionOverflowError(ProfilingError):
    code = "dgp-rejection-overflow"


class EmptyStratumError(ProfilingError):
    code = "empty-stratum"


class InputError(ProfilingError):
    """Malformed or unreadable input file."""

    code = "input-error"


class ReportIntegrityError(ProfilingError):
    """A report failed its emission-time consistency check (a bug, not bad data)."""

    code = "report-integrity"


class ProfilingWarning(UserWarning):
    """Structured warning; ``code`` identifies the condition."""

    def __init__(self, message: str, code: str) -> None:
        super().__init__(message)
        self.code = code


def warn(message: str, code: str, stacklevel: int = 3) -> None:
    warnings.warn(ProfilingWarning(message, code), stacklevel=stacklevel)
