"""Exception types shared across the pricing library."""


class JumpcosError(Exception):
    """Base class for all library errors."""


class ParameterError(JumpcosError, ValueError):
    """A model or engine parameter violates its admissible range."""


class StabilityError(ParameterError):
    """The jump process is unstable (expiration rate <= clustering rate)."""


class GridError(JumpcosError, ValueError):
    """A truncation grid is invalid or does not cover the required range."""


class IntegrationError(JumpcosError, ArithmeticError):
    """An ODE integration produced a non-finite state."""


class OutOfBoundsError(JumpcosError, ValueError):
    """An option price violates static no-arbitrage bounds."""


class ConfigError(JumpcosError, ValueError):
    """A configuration file is missing fields or holds invalid values."""
