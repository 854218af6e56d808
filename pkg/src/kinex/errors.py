"""Exception types shared across the package."""


class KinexError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(KinexError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateStateError(KinexError):
    """A state vector makes a formula undefined (zero welfare mass, empty interior)."""


class InternalConsistencyError(KinexError):
    """A constructed object failed its own post-check; indicates a bug or invalid scale."""


class ConfigError(KinexError):
    """A configuration file is malformed or violates the schema."""


class CalibrationError(KinexError):
    """Root bracketing or tolerance could not be satisfied during calibration."""


class DivergentMeanError(KinexError):
    """Distribution parameters give an infinite mean; the Gini is undefined."""


class QuadratureAccuracyError(KinexError):
    """Numerical integration could not reach the requested accuracy."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class IntegrationError(KinexError):
    """Base class for trajectory integration failures."""


class NonConvergenceError(IntegrationError):
    """max_time was reached before the residual dropped below tolerance.

    Carries the last state, its residual and the elapsed model time so a
    caller can inspect or resume.
    """

    def __init__(self, message, X_last, residual, elapsed_time):
        super().__init__(message)
        self.X_last = X_last
        self.residual = residual
        self.elapsed_time = elapsed_time


class StabilityError(IntegrationError):
    """A population fraction went significantly negative; reduce the time step."""


class ConservationError(IntegrationError):
    """Total population or mean income drifted beyond the configured tolerance."""
