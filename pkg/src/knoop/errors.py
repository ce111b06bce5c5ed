"""Exception types raised across the package."""


class KnoopError(Exception):
    """Base class for every error raised by this package."""


class DegenerateInputError(KnoopError, ValueError):
    """Input data that cannot be processed, e.g. an all-zero or constant column."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class DataFormatError(KnoopError, ValueError):
    """Malformed dataset file."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class NotPositiveDefiniteError(KnoopError, ValueError):
    """Cholesky factorization failed even after the full jitter escalation."""


class StageError(KnoopError):
    """Wraps a failure inside a multi-stage computation with a stage label."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
