"""Exception types raised across the package."""


class AlignRetrieveError(Exception):
    pass


class InvalidParameterError(AlignRetrieveError, ValueError):
    pass


class InvalidInputError(AlignRetrieveError, ValueError):
    pass


class InvalidConfigError(AlignRetrieveError, ValueError):
    pass


class StaleIndexError(AlignRetrieveError):
    """Index embeddings were computed with different embedder weights."""


class NoInteriorOptimumError(AlignRetrieveError, ValueError):
    pass


class DegenerateInputError(AlignRetrieveError, ValueError):
    pass


class ClusterUnusableError(AlignRetrieveError):
    pass


class BackendError(AlignRetrieveError):
    """A completion service failed after exhausting retries."""

    def __init__(self, message: str, status: int | None = None, partial: int = 0):
        super().__init__(message)
        self.status = status
        self.partial = partial
