"""Exception hierarchy shared by all modules."""


class LbmBenchError(Exception):
    """Base class for every error raised by lbmbench."""


class ConfigurationError(LbmBenchError, ValueError):
    """Invalid user configuration (kernel/geometry/options mismatch)."""


class DomainError(LbmBenchError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InvalidStateError(LbmBenchError, ValueError):
    """PDF state is not finite."""


class NumericalFailure(LbmBenchError, ArithmeticError):
    """A simulation diverged (non-finite values appeared)."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ParityError(LbmBenchError, RuntimeError):
    """AA sub-step called out of order."""
