"""Exception hierarchy.

Every error raised by the solvers derives from :class:`CalibrationError` so
callers can catch the family at once. The CLI maps the subclasses onto exit
codes (see :mod:`collimcal.cli`).
"""


class CalibrationError(Exception):
    """Base class for all calibration failures."""


class NumericalError(CalibrationError):
    """A solver hit a numerical failure (exit code 5 in the CLI)."""


class DegenerateConfiguration(CalibrationError):
    """The input views do not constrain the unknowns (exit code 4)."""


class TooFewViews(DegenerateConfiguration):
    pass


class TooFewPoints(CalibrationError):
    pass


class NonPositiveDepth(NumericalError):
    """A target point ended up on or behind the camera.

    ``view`` and ``point`` carry the offending indices when known.
    """

    def __init__(self, message, view=None, point=None):
        super().__init__(message)
        self.view = view
        self.point = point


class SingularIntrinsics(NumericalError):
    pass


class SingularHomography(NumericalError):
    pass


class GaugeViolation(NumericalError):
    pass


class NonPositiveDefinite(NumericalError):
    pass


# the minimal solver's name for the same failure
NotPositiveDefinite = NonPositiveDefinite


class NotConsistent(NumericalError):
    pass


class NoRealRoot(NumericalError):
    pass


class DivergenceDetected(NumericalError):
    pass


class InvalidInitialization(NumericalError):
    pass


class SamplingExhausted(CalibrationError):
    pass


class ConditionWarning(UserWarning):
    """Emitted when a fit succeeds on poorly conditioned data."""
