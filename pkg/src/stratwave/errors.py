"""Exception hierarchy shared across the package."""


class StratwaveError(Exception):
    """Base class for all package-specific errors."""


class ProfileDomainError(StratwaveError):
    """Argument outside a profile's declared admissible range."""


class NonMonotoneError(StratwaveError):
    """The slope map changes sign (or vanishes) on the requested window."""


class BracketError(StratwaveError):
    """Target value lies outside the image of the inversion window."""


class WindowError(StratwaveError):
    """A Bernoulli-map evaluation was requested outside its validated window."""


class CollapseError(StratwaveError):
    """A fluid layer has non-positive thickness somewhere."""


class GridSizeError(StratwaveError):
    """Grid dimensions outside the supported range."""


class SizeMismatchError(StratwaveError):
    """Field shape does not match the grid it is used with."""


class TraceError(StratwaveError):
    """Boundary trace of a stream function violates its Dirichlet value."""


class AdmissibilityError(StratwaveError):
    """Perturbation violates the admissible-space integral constraints."""


class RankDeficientError(StratwaveError):
    """Basis of perturbations is (numerically) linearly dependent."""


class DimensionCapError(StratwaveError):
    """Dense eigensolve requested above the supported matrix size."""


class NewtonError(StratwaveError):
    """Damped Newton iteration failed to converge."""


class StagnationError(StratwaveError):
    """Vertical stream-function derivative changes sign (stagnation point)."""


class ConfigError(StratwaveError):
    """Invalid or incomplete run configuration."""
