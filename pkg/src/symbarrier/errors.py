"""Exception types shared across the toolkit."""


class SymbarrierError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(SymbarrierError, ValueError):
    """Matrix or vector has an unusable shape."""


class DomainError(SymbarrierError, ValueError):
    """A parameter lies outside the range where a construction is defined."""


class ValidationError(SymbarrierError, ValueError):
    """Input fails a numerical precondition (symmetry, definiteness, norm...)."""


class ConstructionError(SymbarrierError, RuntimeError):
    """A field or boundary construction failed its internal residual check."""


class IntegrationError(SymbarrierError, RuntimeError):
    """Flow integration left the region where the field is defined."""


class SearchError(SymbarrierError, RuntimeError):
    """Certificate search exhausted its budget without a valid result.

    ``best`` holds the best bound found so that callers can report it.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
