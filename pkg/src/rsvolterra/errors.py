"""Exception hierarchy.

Every exception belongs to exactly one of three families, which the CLI maps
to exit codes: :class:`ConditionError` (1), :class:`NumericalError` (2) and
:class:`ConfigError` (3).
"""

from __future__ import annotations


class VolterraError(Exception):
    """Base class for all package errors."""

    exit_code = 2


class ConditionError(VolterraError):
    """A hypothesis on the problem or kernel does not hold."""

    exit_code = 1


class NumericalError(VolterraError):
    """A numerical procedure failed to reach its accuracy contract."""

    exit_code = 2


class ConfigError(VolterraError):
    """Malformed input or parameters."""

    exit_code = 3


# grid
class InvalidGrading(ConfigError):
    pass


class OutOfRange(NumericalError):
    pass


class IllegalInclusion(ConditionError):
    pass


# kernels
class NotRegularSingular(ConditionError):
    pass


class ConditionFailed(ConditionError):
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class NoVanishing(ConditionError):
    pass


class DegenerateRoot(ConditionError):
    pass


# proto / volterra / laplace
class QuadratureFailure(NumericalError):
    pass


class NotProportional(NumericalError):
    pass


class NoLimit(NumericalError):
    pass


class ExponentTooSingular(ConditionError):
    pass


class DomainError(ConfigError):
    pass


class SearchExhausted(NumericalError):
    pass


class HalfPlaneViolation(ConditionError):
    pass


class TailTooLarge(NumericalError):
    pass


# solver
class NotContracting(NumericalError):
    pass


class MaxIterExceeded(NumericalError):
    pass


class ResonanceError(NumericalError):
    pass


class MismatchDetected(NumericalError):
    pass


# level1
class RootFindingFailure(NumericalError):
    pass


class NoAdmissibleRay(ConditionError):
    pass
