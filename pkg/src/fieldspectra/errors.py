"""Exception types shared across the package."""


class FieldSpectraError(Exception):
    """Base class for every error raised by this package."""


class InvalidShapeError(FieldSpectraError, ValueError):
    """Lattice shape has a non-positive extent or an unsupported dimension."""


class InvalidKernelError(FieldSpectraError, ValueError):
    """Kernel coefficients violate a structural constraint."""


class UnsupportedModelError(FieldSpectraError, TypeError):
    """The operation is not defined for the given field model."""


class InvalidDensityError(FieldSpectraError, ValueError):
    """A spectral density callable returned negative or non-finite values."""


class MissingInnovationError(FieldSpectraError, LookupError):
    """An innovation lattice does not cover the requested index window."""


class PairingError(FieldSpectraError, ValueError):
    """Martingale and field evaluations were not built on shared innovations."""


class NonGenericFrequencyError(FieldSpectraError, ValueError):
    """A frequency too close to the exceptional null set was refused."""


class InvalidPlanError(FieldSpectraError, ValueError):
    """An experiment plan fails a precondition."""


class InsufficientDataError(FieldSpectraError, ValueError):
    """Too few samples for the requested statistic."""


class ConfigError(FieldSpectraError, ValueError):
    """A run configuration could not be parsed or validated."""
