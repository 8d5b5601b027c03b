"""Exception types shared across the package."""


class LamstrError(Exception):
    """Base class for all package errors."""


class ModelMismatchError(LamstrError):
    """Parameter vector does not fit the selected identification model."""


class BoundaryPointError(LamstrError):
    """Directional derivatives requested at a boundary point of the parameter space."""


class DegenerateRegionError(LamstrError):
    """The identification region is the degenerate set {0}; the optimal rule is undefined."""


class DomainError(LamstrError):
    """Scalar argument outside the mathematical domain (e.g. non-positive standard deviation)."""


class NotPSDError(LamstrError):
    """Covariance matrix is not positive semidefinite even after jitter."""


class EmptyCellError(LamstrError):
    """An estimator cell (treatment/participation combination) contains no observations."""


class BootstrapDegenerateError(LamstrError):
    """Bootstrap resampling kept producing empty estimator cells past the retry budget."""


class PathOutOfRangeError(LamstrError):
    """A local perturbation path left the admissible parameter space."""


class ConfigError(LamstrError):
    """Malformed configuration text or unknown configuration key."""


class HarnessError(LamstrError):
    """The simulation harness could not produce a usable result (e.g. all replications degenerate)."""
