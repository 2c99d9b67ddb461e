"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input data violates an invariant (non-finite samples, bad labels, ...)."""


class ParameterError(ValueError):
    """An argument is outside its documented range."""


class ShapeError(ValueError):
    """Array shapes are incompatible for the requested operation."""


class UnsupportedOperationError(RuntimeError):
    """The operation is deliberately out of scope (e.g. upsampling)."""


class TransferError(RuntimeError):
    """Weight transfer failed a shape or architecture compatibility check."""
