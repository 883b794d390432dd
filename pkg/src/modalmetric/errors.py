"""Exception types shared across the package."""


class ModalMetricError(Exception):
    """Base class for all package errors."""


class FormulaSyntaxError(ModalMetricError):
    """Raised when formula text (or a file) does not parse.

    ``position`` is the 0-based character offset of the offending token,
    or ``None`` when the error is not tied to a single location.
    """

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class SignatureError(ModalMetricError):
    """An atom or agent is not declared, or two objects disagree on signature."""


class BudgetExceeded(ModalMetricError):
    """An enumeration would exceed the configured budget."""


class ConditionError(ModalMetricError):
    """A determinism, exhaustivity or metric-axiom precondition is violated."""


class ConvergenceError(ModalMetricError):
    """A weight tail bound never drops below the requested tolerance."""
