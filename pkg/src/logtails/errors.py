"""Exception hierarchy.

Every error raised on purpose by the library derives from
:class:`LogTailsError`, which the CLI maps to exit status 1.
"""


class LogTailsError(ValueError):
    """Base class for domain errors."""


class NotSymmetric(LogTailsError):
    pass


class NotPositiveDefinite(LogTailsError):
    pass


class IndexSetError(LogTailsError):
    pass


class EmptyIndexSet(IndexSetError):
    pass


class IndexOutOfRange(IndexSetError):
    pass


class InfeasibleRegion(LogTailsError):
    pass


class DomainError(LogTailsError):
    pass


class AssumptionViolated(LogTailsError):
    """The nondegeneracy condition on the QP multipliers fails.

    ``split`` names the positive component whose split problem failed, when
    the check was made for a mixed-sign sum.
    """

    def __init__(self, message, split=None, margins=None):
        super().__init__(message)
        self.split = split
        self.margins = margins


class AssumptionBorderline(AssumptionViolated):
    """A saturated constraint has a multiplier within tolerance of zero."""


class NonSingletonDominance(LogTailsError):
    pass


class ZeroWeight(LogTailsError):
    pass


class ParseError(LogTailsError):
    pass


class ValidationError(LogTailsError):
    pass
