"""Exception hierarchy shared across the package."""


class PulseGANError(Exception):
    """Base class for all package errors."""


class DegenerateInputError(PulseGANError, ValueError):
    """Input has no variation where variation is required."""


class DegenerateChrominanceError(DegenerateInputError):
    """Band-passed chrominance signal has zero spread, alpha is undefined."""


class SignalTooShortError(PulseGANError, ValueError):
    pass


class ShapeError(PulseGANError, ValueError):
    pass


class NoPeaksError(PulseGANError, ValueError):
    pass


class ConfigError(PulseGANError, ValueError):
    """Invalid configuration. ``key`` names the offending entry."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class CheckpointError(PulseGANError):
    """Checkpoint file is corrupt, truncated or of an unsupported version."""
