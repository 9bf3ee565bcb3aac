"""Exception hierarchy shared by every halphen module."""


class HalphenError(Exception):
    """Base class for all library errors."""


class DomainError(HalphenError):
    """Input lies outside the region where an operation is defined."""


class TruncationError(HalphenError):
    """A series could not reach the requested tail tolerance."""

    def __init__(self, message: str, tail_bound: float, terms: int):
        super().__init__(message)
        self.tail_bound = tail_bound
        self.terms = terms


class FiniteTimeSingularityError(HalphenError):
    """The integrated solution escaped the overflow guard."""

    def __init__(self, message: str, escape_time: float):
        super().__init__(message)
        self.escape_time = escape_time


class ConsistencyError(HalphenError):
    """A quantity that must be real (or otherwise constrained) is not."""


class EmptyDomainError(HalphenError):
    """No parameter subinterval satisfies the positivity requirements."""


class ModeError(HalphenError):
    """Operation requested in a mode the configuration does not support."""


class ParameterError(HalphenError, ValueError):
    """Invalid numerical parameter (step size, tolerance, environment override)."""


class AccuracyError(HalphenError):
    """Quadrature or fit did not reach the requested accuracy."""


class ProjectionSingularError(HalphenError):
    """The Higgs field is too small to define the abelian projection."""


class DegenerateMapError(HalphenError):
    """Rational map whose numerator and denominator share a root."""

    def __init__(self, message: str, delta: complex):
        super().__init__(message)
        self.delta = delta


class ConditioningError(HalphenError):
    """Loss of numerical rank while splitting decaying and growing solutions."""

    def __init__(self, message: str, condition: float, diagnostics: dict | None = None):
        super().__init__(message)
        self.condition = condition
        self.diagnostics = diagnostics or {}


class NumericalError(HalphenError):
    """A numerical kernel (eigen-solver, root finder) failed to converge."""
