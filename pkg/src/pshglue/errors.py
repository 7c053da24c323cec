"""Exception hierarchy shared by every module."""


class GeometryError(Exception):
    pass


class DomainError(GeometryError, ValueError):
    """A point lies outside (or too close to the excluded locus of) a domain."""


class StencilError(DomainError):
    """A finite-difference stencil leaves the domain of the function."""


class NumericError(GeometryError, ArithmeticError):
    """Non-finite values or a solver that failed to converge."""


class ConfigError(GeometryError, ValueError):
    """Invalid parameters or a malformed configuration."""


class InfeasibleError(GeometryError):
    """A construction cannot be completed with the given data."""


class InconsistentMetadataError(GeometryError):
    """Declared homogeneity does not match the evaluator."""


class InvalidAmbientError(GeometryError, ValueError):
    """Ambient Levi form not positive definite where it is needed."""
