"""Exception hierarchy shared across the package."""


class StakeSimError(Exception):
    """Base class for all stakesim errors."""


class InvalidParameterError(StakeSimError, ValueError):
    """A constructor or operation received an out-of-domain parameter."""


class ResourceLimitError(StakeSimError, RuntimeError):
    """A requested computation would exceed a hard resource budget."""


class OutOfRegimeError(StakeSimError, ValueError):
    """A closed form was requested outside the regime where it is exact.

    Carries ``simulated_only=True`` so callers can distinguish "the number
    would be wrong" from "the inputs are malformed": simulation is still
    meaningful, only the analytic shortcut is not.
    """

    simulated_only = True


class ConfigError(StakeSimError, ValueError):
    """An experiment configuration document is missing or malformed."""
