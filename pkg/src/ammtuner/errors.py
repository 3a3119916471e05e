"""Exception types shared across the package."""


class AmmTunerError(Exception):
    """Base class for package errors."""


class SolverError(AmmTunerError):
    """Invariant solver failed to converge; carries the last residual."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class QuoteInfeasibleError(AmmTunerError):
    """Requested trade cannot be satisfied by the pool."""


class SamplingError(AmmTunerError):
    """Rejection sampling exhausted its draw budget."""


class ConfigError(AmmTunerError):
    """Invalid or inconsistent run configuration; names the offending key."""
