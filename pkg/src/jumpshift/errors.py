"""Exception types shared across the package."""


class JumpshiftError(Exception):
    """Base class for all package errors."""


class ConfigurationError(JumpshiftError, ValueError):
    """Invalid parameters or experiment configuration.

    Carries the full list of problems so callers can report every
    offending field at once.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DomainError(JumpshiftError, ValueError):
    """Argument outside the operation's admissible range."""


class CapacityError(JumpshiftError, ValueError):
    """More jump coordinates than the basis (or sample) can hold."""


class DegeneracyError(JumpshiftError, ValueError):
    """An eigenvalue of -1 makes the requested inverse undefined."""


class NonContractiveError(JumpshiftError, ValueError):
    """Fixed-point iteration requested where max |eigenvalue| >= 1."""


class UnsupportedOperationError(JumpshiftError, NotImplementedError):
    """Operation not defined for this basis kind or problem size."""


class UsageError(JumpshiftError, ValueError):
    """Operands that do not belong together (e.g. different source paths)."""


class ConvergenceError(JumpshiftError, RuntimeError):
    """Iteration budget exhausted; carries the last residual."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = float(residual)
