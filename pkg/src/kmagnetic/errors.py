"""Exception hierarchy shared by all modules."""


class KMagneticError(Exception):
    """Base class for every error raised by the package."""


class InvalidArgumentError(KMagneticError, ValueError):
    pass


class PoleSingularityError(KMagneticError, ValueError):
    """A chart or projection was asked to work at its singular point."""


class PoleProximityError(KMagneticError, ValueError):
    """A curve passes too close to the pole of a stereographic chart."""


class DegenerateCurveError(KMagneticError, ValueError):
    """The curve is constant (numerically a point)."""


class IrregularCurveError(KMagneticError, ValueError):
    """The curve has a vanishing velocity somewhere."""


class OracleUnavailableError(KMagneticError):
    """The independent surface-integral oracle cannot handle this curve."""


class InvalidBaseError(KMagneticError, ValueError):
    """A tangent field does not live over the expected great circle."""


class ProjectionViolationError(KMagneticError, ValueError):
    """A right-hand side was not orthogonal to the kernel."""


class CorrectorDivergenceError(KMagneticError):
    """The reduction corrector failed to converge."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SearchFailureError(KMagneticError):
    pass


class StabilityError(KMagneticError, ValueError):
    """Integrator step too large for the requested speed."""


class ShootingFailureError(KMagneticError):
    def __init__(self, message, defect=float("nan")):
        super().__init__(message)
        self.defect = defect


class ConfigError(KMagneticError, ValueError):
    """Malformed run configuration or input file."""
