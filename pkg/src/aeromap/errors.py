"""Exception types raised across the package."""


class AeromapError(Exception):
    """Base class for all package errors."""


class DimensionError(AeromapError, ValueError):
    """Array or point dimensions do not agree."""


class DomainError(AeromapError, ValueError):
    """Argument outside the mathematical domain of a function."""


class SingularPointError(AeromapError, ValueError):
    """Green's function evaluated (numerically) at its singularity."""


class GeometryError(AeromapError, ValueError):
    """Invalid microphone/focus geometry, e.g. overlapping regions."""


class HermitianError(AeromapError, ValueError):
    """A matrix that must be Hermitian is not, beyond tolerance."""


class ConvergenceError(AeromapError, RuntimeError):
    """An iterative solver failed (e.g. its line search broke down)."""


class ScenarioError(AeromapError, ValueError):
    """Invalid or inconsistent scenario definition."""


class FileFormatError(AeromapError, ValueError):
    """A data file could not be parsed."""
