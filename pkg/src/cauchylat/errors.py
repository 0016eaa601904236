"""Exception hierarchy shared by all modules."""


class CauchylatError(ValueError):
    """Base class for every error raised by the library."""


class InvalidBasisError(CauchylatError):
    """The basis is not unimodular (or not a basis at all)."""


class DomainError(CauchylatError):
    """An argument lies outside the domain of the operation."""


class SizeError(CauchylatError):
    """A size guard was exceeded."""


class UnstableGridError(CauchylatError):
    """The empirical characteristic function is too small on the grid."""


class ConfigError(CauchylatError):
    """Invalid experiment configuration."""
