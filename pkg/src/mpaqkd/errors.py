"""Exception types shared across the package."""


class MpaqkdError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(MpaqkdError, ValueError):
    """Invalid configuration.  The message lists every violated constraint."""


class InsufficientStatisticsError(MpaqkdError, RuntimeError):
    """Not enough counts to compute the requested estimate."""


class EmptyKeyError(MpaqkdError, RuntimeError):
    """Sifting produced no key bits."""
