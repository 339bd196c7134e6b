"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument is outside the mathematical domain of the operation."""


class UnsupportedOrderError(DomainError):
    """Requested Bessel order exceeds the supported cap."""


class SingularConfigurationError(DomainError):
    """Geometry hits a removable-singularity configuration (e.g. sin(alpha) = 0)."""


class DistributionalCaseError(DomainError):
    """The requested quantity is a distribution, not a number.

    Raised for one-step flights, where the displacement density is an exact
    Dirac delta; callers should use the closed form instead (see
    :func:`besselflight.flight.flight_delta`).
    """


class InsufficientBreakPointsError(ValueError):
    """Oscillatory integration needs at least four break points."""


class IntegrandEvaluationError(RuntimeError):
    """The integrand returned a non-finite value; carries the abscissa."""

    def __init__(self, abscissa, message=None):
        self.abscissa = float(abscissa)
        super().__init__(message or f"non-finite integrand value at x = {abscissa!r}")


class ZeroFindingError(RuntimeError):
    """Newton refinement of a Bessel zero failed to converge."""
