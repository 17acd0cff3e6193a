"""Exception hierarchy shared by the numerical modules."""


class HamcalError(Exception):
    """Base class for all library errors."""


class NumericalError(HamcalError):
    """A computation ran but its result cannot be trusted."""


class SupportError(NumericalError):
    """A field or map leaves its declared support box."""


class ResolutionError(NumericalError):
    """Step or grid refinement disagrees beyond tolerance."""


class ConvergenceError(NumericalError):
    """An implicit solve did not converge within its iteration budget."""


class AdmissibilityError(NumericalError):
    """A generating function lost monotonicity where it was required."""


class ClosednessError(NumericalError):
    """A recovered 1-form is not closed at the working resolution."""


class FlowMatchError(NumericalError):
    """A generator does not reproduce the isotopy it was built for."""
