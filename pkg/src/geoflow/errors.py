"""Exception types raised by geoflow."""


class GeoflowError(Exception):
    """Base class for all geoflow errors."""


class MetricConfigError(GeoflowError, ValueError):
    """Invalid metric specification or JSON document."""


class ChartDomainError(GeoflowError, ValueError):
    """A point lies outside the domain of its chart."""


class UnsupportedVariantError(GeoflowError, TypeError):
    """The operation does not apply to this metric variant."""


class ConePointError(GeoflowError):
    """A straight trajectory on the doubled triangle ran into a cone point."""


class StepTooLargeError(GeoflowError, ValueError):
    pass


class NonGeodesicError(GeoflowError, ValueError):
    """A carrier curve is not a geodesic to the required residual."""


class NonStationaryError(GeoflowError, ValueError):
    pass


class DegenerateFunctionError(GeoflowError, ValueError):
    pass


class ConvergenceError(GeoflowError):
    """An iteration did not converge.

    ``last`` holds the final iterate and ``residual`` its residual, so the
    caller can inspect or resume from where the iteration stopped.
    """

    def __init__(self, message, last=None, residual=None):
        super().__init__(message)
        self.last = last
        self.residual = residual


class RefinementError(GeoflowError):
    """Eigenvalue changed by more than the tolerance under grid refinement."""

    def __init__(self, message, coarse, fine):
        super().__init__(message)
        self.coarse = coarse
        self.fine = fine
