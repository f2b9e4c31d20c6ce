"""Exception types shared across the toolkit."""


class MoltrError(Exception):
    """Base class for all toolkit errors."""


class InputError(MoltrError, ValueError):
    """Bad runtime input: shape mismatch, non-finite values, misalignment."""


class ConfigError(MoltrError, ValueError):
    """Invalid configuration value."""


class TrainingError(MoltrError, RuntimeError):
    """Training cannot proceed (empty data, divergence, zero coverage)."""


class ParseError(MoltrError, ValueError):
    """Malformed persisted file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CalibrationError(MoltrError, RuntimeError):
    """Boost calibration failed to converge or violated monotonicity."""
