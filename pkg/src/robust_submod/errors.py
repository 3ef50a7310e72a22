"""Exception taxonomy shared by every module in the package."""


class RobustSubmodError(Exception):
    """Base class for all package errors."""


class DomainError(RobustSubmodError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ContractError(RobustSubmodError, ValueError):
    """A caller-supplied object violates a structural promise (e.g. a
    supposedly monotone oracle returned a negative marginal)."""


class FormatError(RobustSubmodError, ValueError):
    """A file or serialized payload is malformed."""


class NumericalError(RobustSubmodError, ArithmeticError):
    """A numerical routine lost required structure (non-finite values,
    covariance not positive definite after repair, ...)."""


class ConfigError(RobustSubmodError, ValueError):
    """An experiment configuration is invalid (unknown key, bad value)."""


class IoError(RobustSubmodError, OSError):
    """Reading or writing an artifact failed."""
