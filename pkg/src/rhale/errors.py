"""Exception hierarchy shared by every module."""


class RhaleError(Exception):
    """Base class for all errors raised by this package."""


class InputError(RhaleError, ValueError):
    """Malformed or out-of-range input (shapes, ranges, parameters)."""


class ModelError(RhaleError):
    """The model returned something unusable, e.g. a non-finite output."""


class CapabilityError(RhaleError):
    """The requested operation is not supported for these inputs."""


class InfeasibleError(RhaleError):
    """No solution satisfies the constraints (e.g. too few points per bin)."""


class EmptyBinError(RhaleError, ValueError):
    """A bin holds no instances, so its effect is undefined."""


class DegenerateBinError(RhaleError, ValueError):
    """A bin holds too few instances for a sample standard deviation."""
