"""Exception hierarchy shared across the package."""


class ApigroundError(Exception):
    """Base class for all errors raised by this package."""


class IntegrityError(ApigroundError):
    """A persisted index is corrupt (bad digest, truncated or misaligned vectors)."""


class IncompatibilityError(ApigroundError):
    """An index and a query-time component disagree (embedder id, dimension)."""


class BudgetError(ApigroundError):
    """The token budget is too small to fit even a minimal prompt."""


class TransportError(ApigroundError):
    """A remote call failed after the configured number of attempts."""

    def __init__(self, message: str, attempts: int):
        super().__init__(message)
        self.attempts = attempts
