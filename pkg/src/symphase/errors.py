"""Exception taxonomy shared across the package."""


class ConfigurationError(ValueError):
    """Invalid specs, mismatched dimensions, or malformed config documents."""


class NumericError(ArithmeticError):
    """Non-finite values encountered where finite math was required.

    Carries optional context (the offending array or state) in ``payload``.
    """

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


class NotReadyError(RuntimeError):
    """Retriable signal: a buffer does not yet hold enough data to sample."""


class CheckpointError(RuntimeError):
    """Corrupt, truncated, or incompatible checkpoint files."""
