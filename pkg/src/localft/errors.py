class DomainError(ValueError):
    """Argument outside the domain of an operation (bad probability, bad bracket, ...)."""


class NumericalError(ArithmeticError):
    """An iterative solver failed to converge or produced an inconsistent value."""


class ConfigError(ValueError):
    """Malformed experiment configuration."""
