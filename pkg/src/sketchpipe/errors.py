"""Exception types shared across the library."""


class DimensionError(ValueError):
    """A vector or matrix has an incompatible or unsupported shape."""


class ParameterError(ValueError):
    """A numeric parameter is outside its valid range."""
