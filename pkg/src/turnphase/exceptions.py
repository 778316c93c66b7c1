class TurnphaseError(Exception):
    """Base class for errors raised by this package."""


class DomainError(TurnphaseError, ValueError):
    """A point lies outside the domain on which an object is defined."""


class LocalSolveError(TurnphaseError):
    """A single-interval solve failed (singular system, no Newton convergence)."""


class ResolutionError(TurnphaseError):
    """The adaptive solver could not resolve the solution within its budget."""

    def __init__(self, message, worst_tail=None, smallest_width=None):
        super().__init__(message)
        self.worst_tail = worst_tail
        self.smallest_width = smallest_width


class ConfigurationError(TurnphaseError, ValueError):
    """Inconsistent turning-point data or window selection."""
