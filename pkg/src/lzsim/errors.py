"""Exception and warning types shared across the package."""


class ConfigError(ValueError):
    """A run configuration is unreadable, has unknown keys, or fails validation."""


class DegenerateDriveError(ValueError):
    """The drive has no avoided crossings (zero sweep amplitude or rate)."""


class IntegrationError(RuntimeError):
    """Raised when the propagator's norm drift exceeds the configured tolerance."""


class NoOscillationError(RuntimeError):
    """No spectral peak stands out above the noise floor of a trajectory."""


class FitFailureError(RuntimeError):
    """A least-squares fit did not converge or the data is degenerate."""


class ModelAccuracyWarning(UserWarning):
    """The adiabatic-impulse model is being used outside its comfort zone."""
