"""Exception hierarchy shared across the package."""


class GyroSimError(Exception):
    """Base class for all domain errors raised by nvgyro."""


class SingularSplittingError(GyroSimError):
    """Raised when D**2 - (gamma_e*B)**2 is too close to zero.

    Signals the ground-state level-anticrossing regime where the
    second-order hyperfine correction diverges.
    """


class ConfigError(GyroSimError):
    """Invalid configuration file or configuration values."""


class InsufficientSpanError(GyroSimError):
    """Fringe data too short, too sparse, or degenerate to fit."""


class FitConvergenceError(GyroSimError):
    """Nonlinear least squares failed to converge."""


class NonUniformGridError(GyroSimError):
    """Operation requires uniformly spaced samples."""
