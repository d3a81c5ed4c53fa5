"""Exception types shared across the package."""


class TvtuneError(Exception):
    """Base class for all package errors."""


class SimulationFault(TvtuneError):
    """Non-finite state or force encountered while integrating the plant."""


class DegenerateSpeedError(SimulationFault):
    """Longitudinal speed dropped to or below the model validity floor."""


class AllocationError(TvtuneError):
    """The allocator's 4x4 system is singular or too ill-conditioned."""


class ConfigError(TvtuneError):
    """Invalid or inconsistent configuration."""


class UsageError(TvtuneError):
    """API called in a state where the call is not allowed."""


class TrainingAborted(TvtuneError):
    """Training produced a non-finite loss."""
