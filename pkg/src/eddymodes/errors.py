"""Exception hierarchy.

The CLI maps these onto exit codes: validation errors exit 2, numerical
failures exit 3, inconclusive imaging exits 4.
"""
from __future__ import annotations


class EddymodesError(Exception):
    """Base class for all package errors."""


class ValidationError(EddymodesError, ValueError):
    """Bad user input: shapes, signs, ranges, malformed scenarios."""


class NumericalError(EddymodesError, RuntimeError):
    """A numerical procedure failed to produce a trustworthy result."""


class AssemblyError(NumericalError):
    """Operator assembly produced an unusable matrix."""


class DefinitenessError(NumericalError):
    """A matrix required to be positive definite failed factorization."""


class ConvergenceError(NumericalError):
    """An iterative or factorization-based solve exceeded its residual tolerance."""


class ExtractionError(NumericalError):
    """No admissible decaying component could be recovered from a signal."""


class SignalTooShortError(ExtractionError):
    """Too few samples for the requested model order."""


class InconclusiveError(EddymodesError, RuntimeError):
    """A hypothesis test had nothing to compare or no candidate survived."""
