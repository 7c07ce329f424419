"""Exception types shared across the package."""


class DimensionMismatch(ValueError):
    pass


class NonConvergence(RuntimeError):
    pass


class SupportTooLarge(ValueError):
    pass


class NonFiniteInput(ValueError):
    pass


class InvalidProbability(ValueError):
    pass


class SteppedAfterTerminal(RuntimeError):
    pass


class UnknownScenario(ValueError):
    pass


class InvalidPolicy(ValueError):
    pass


class WindowTooLarge(ValueError):
    pass


class ConfigError(ValueError):
    """Bad config file, unknown key or out-of-range value."""
