"""Exception hierarchy for the anomaly detection pipeline."""


class CladError(Exception):
    """Base exception for all pipeline errors."""
    pass


class UsageError(CladError):
    """A caller violated an operation's precondition."""
    pass


class DimensionError(UsageError):
    """Tensor or image shapes disagree.

    Args:
        message: Human-readable description
        axis: Name or index of the offending axis, when known
    """

    def __init__(self, message: str, axis: object = None):
        self.axis = axis
        if axis is not None:
            message = f"{message} (axis: {axis})"
        super().__init__(message)


class IntegrityError(CladError):
    """Files on disk are inconsistent, truncated or corrupt."""
    pass


class FormatError(CladError):
    """A file could not be parsed in its declared format."""
    pass


class NumericalError(CladError):
    """An operation produced a non-finite value."""
    pass
