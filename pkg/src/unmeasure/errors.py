"""Exception hierarchy shared by all modules.

Every domain error derives from :class:`UnmeasureError`, which is itself a
``ValueError`` so callers that only care about bad input can catch that.
"""


class UnmeasureError(ValueError):
    """Base class for domain errors raised by this package."""


class SupportMismatchError(UnmeasureError):
    """Two measures (or distributions) are not defined on the same atoms."""


class NegativeWeightError(UnmeasureError):
    pass


class ZeroMassError(UnmeasureError):
    """Conditioning on, or coding over, a set of zero mass."""


class MeanMismatchError(UnmeasureError):
    pass


class GridSizeError(UnmeasureError):
    """A count grid would exceed the configured cell budget."""


class InfeasibleError(UnmeasureError):
    """A constraint set has no (strictly) feasible point."""


class ConvergenceError(UnmeasureError):
    pass


class ConditionError(UnmeasureError):
    """A standing hypothesis of a check is not met, so the check refuses to run."""


class CertificateError(UnmeasureError):
    """Malformed dichotomy certificate."""
