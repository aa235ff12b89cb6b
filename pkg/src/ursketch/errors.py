"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Parameters violate a documented precondition."""


class DimensionError(ValueError):
    """A vector or index does not fit the ambient dimension."""


class DomainError(ValueError):
    """A numeric argument lies outside the function's domain."""


class FormatError(ValueError):
    """Serialized bytes are malformed or belong to different parameters."""


class DecodeFailure(Exception):
    """The syndrome is not the image of any sufficiently sparse vector."""


class ProtocolFailure(Exception):
    """Bob (or a reduction built on Bob) reports Fail."""


class ConstructionFailure(RuntimeError):
    """A randomized construction ran out of its retry budget."""


class HypothesisError(ValueError):
    """The inputs do not satisfy the hypothesis of the checked inequality."""
