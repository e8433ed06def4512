"""Exception types shared across the package."""

from __future__ import annotations


class ValidationError(ValueError):
    """Input fails a structural precondition (bad table, ill-defined map, ...)."""


class DimensionError(ValidationError):
    """Vector or matrix dimensions do not match the group."""


class AmbientMismatchError(ValidationError):
    """Operands live in different ambient groups."""


class ContainmentError(ValidationError):
    """A required subgroup containment does not hold."""


class NormalityError(ValidationError):
    """A required normality hypothesis does not hold."""


class HypothesisFailure(RuntimeError):
    """A finiteness hypothesis of a formula fails (or cannot be established)."""


class InversionFailure(RuntimeError):
    """No banded inverse exists within the search budget."""


class Inconclusive(RuntimeError):
    """Budget exhausted without a certified stabilization.

    Carries the partial report so callers can surface it instead of guessing.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report
