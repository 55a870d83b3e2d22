"""Exception types raised by the integrators."""


class AsodeError(Exception):
    """Base class for all errors raised by this package."""


class RootSelectionError(AsodeError):
    """A coefficient cubic did not have the expected three real roots."""


class SingularD(AsodeError):
    """The stage matrix ``I - a*h*B`` is numerically singular for this step size."""


class NonFiniteState(AsodeError):
    """A stage or solution vector contains inf or nan."""


class StepSizeUnderflow(AsodeError):
    """The step size dropped below ``h_min`` after rejections."""


class MaxStepsExceeded(AsodeError):
    """The integration did not reach the end point within ``max_steps`` attempts."""


class UnknownProblem(AsodeError, KeyError):
    """A benchmark problem id or name was not recognised."""


class OracleDisagreement(AsodeError):
    """The two independent reference solutions differ by more than the allowed amount."""
