"""Exception hierarchy. CLI exit codes are keyed off these classes."""


class HawkesGofError(Exception):
    """Base class for all package errors."""


class DataError(HawkesGofError, ValueError):
    """Malformed or unusable input data (CLI exit code 2)."""


class DomainError(DataError):
    """A time or parameter lies outside the admissible domain."""


class ValidationError(DataError):
    """A model specification violates its constraints."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class InsufficientEventsError(DataError):
    """Too few events for the requested computation."""


class NumericalError(HawkesGofError, RuntimeError):
    """A numerical procedure failed (CLI exit code 3)."""


class InvariantViolation(NumericalError):
    """An internal invariant that valid inputs guarantee was broken."""


class BootstrapDegenerateError(NumericalError):
    """Too many bootstrap replicates had to be skipped."""
