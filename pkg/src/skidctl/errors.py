"""Exception types shared across the package."""


class SkidctlError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(SkidctlError, ValueError):
    """A physical or configuration parameter violates its constraints."""


class InvalidPathError(InvalidParameterError):
    """Reference path geometry is infeasible for the vehicle."""


class ContractError(SkidctlError):
    """An operation was called outside its stated preconditions."""


class NumericFaultError(SkidctlError):
    """A non-finite value appeared where finite numbers are required."""


class DegenerateRangeError(SkidctlError, ValueError):
    """Scaling was requested for data with max == min."""


class LMStepError(SkidctlError):
    """Damped normal-equation solve failed; caller should retry with larger damping."""


class TrainingDivergedError(SkidctlError):
    """Damping exceeded its ceiling without producing an acceptable step."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history


class ConfigError(SkidctlError, ValueError):
    """A configuration file or CLI input failed validation."""
