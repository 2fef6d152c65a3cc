"""Exception types shared across the package."""


class TestInfoError(Exception):
    """Base class for all package errors."""


class DomainError(TestInfoError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DegenerateEvidenceError(TestInfoError, ValueError):
    """Evidence function has V'(1) = 0, so the conversion number is undefined."""


class UnsupportedModelError(TestInfoError, TypeError):
    """The requested operation has no implementation for this model family."""


class DegenerateEstimateError(TestInfoError, ArithmeticError):
    """A Monte Carlo estimate collapsed (e.g. every likelihood draw underflowed)."""


class AbortedEstimateError(TestInfoError, ArithmeticError):
    """Too many engine failures inside a Monte Carlo loop; estimate abandoned."""


class InsufficientCalibrationError(TestInfoError, ValueError):
    """Too few calibration draws to resolve the requested test size."""


class UndefinedFractionError(TestInfoError, ArithmeticError):
    """A ratio of information measures is 0/0 or has a non-positive denominator."""


class CriterionEvaluationError(TestInfoError, RuntimeError):
    """A criterion evaluator failed during design search.

    Carries the partial search result (if any) on the ``partial`` attribute.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
