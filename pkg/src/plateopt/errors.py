"""Exception hierarchy shared across the toolkit."""


class PlateOptError(Exception):
    """Base class for all toolkit errors."""


class SelfIntersectingOutline(PlateOptError):
    """Scaled outline spline crosses itself."""


class NonPositiveThickness(PlateOptError):
    """Thickness field dips to zero or below somewhere on the plate."""


class PerturbationInfeasible(PlateOptError):
    """Rejection sampling exceeded the per-component redraw cap."""


class ResolutionTooCoarse(PlateOptError):
    """Grid resolution gives too few nodes across the plate."""


class DegenerateMask(PlateOptError):
    """Rasterized plate splits into disconnected components."""


class EigenSolveFailure(PlateOptError):
    """Sparse eigensolver failed to converge or returned garbage."""


class MassNotPositive(PlateOptError):
    """Assembled mass matrix is not positive definite."""


class OracleFailureRate(PlateOptError):
    """Too many samples failed the eigenvalue oracle during generation."""


class SingularNormalEquations(PlateOptError):
    """Levenberg-Marquardt damping escalation exhausted."""


class NotTrained(PlateOptError):
    """Surrogate used before (or without) a successful fit."""


class DegenerateVariance(PlateOptError):
    """R-squared undefined: an output is constant on the partition."""


class GateFailed(PlateOptError):
    """Model failed the R-squared reliability gate."""


class ObjectiveNaN(PlateOptError):
    """Objective returned NaN during minimization."""


class UsageError(PlateOptError):
    """Bad command-line flags or config."""
