"""Exception types raised across the package."""


class CasimirPlatesError(Exception):
    """Base class for all package errors."""


class NonConvergence(CasimirPlatesError):
    pass


class RankDeficient(CasimirPlatesError):
    pass


class SpectrumContainsPlusMinusOne(CasimirPlatesError):
    """The Cayley transform is undefined because +1 or -1 is an eigenvalue."""


class UnknownPreset(CasimirPlatesError, KeyError):
    pass


class UnknownFamily(CasimirPlatesError, KeyError):
    pass


class MissingParameter(CasimirPlatesError, KeyError):
    pass


class NonUnitaryResult(CasimirPlatesError):
    pass


class SamplingBudgetExceeded(CasimirPlatesError):
    pass


class NotARoot(CasimirPlatesError):
    pass


class ContourTooCloseToZero(CasimirPlatesError):
    pass


class NonIntegerWinding(CasimirPlatesError):
    pass


class CountMismatch(CasimirPlatesError):
    """Real roots found by the scan disagree with the winding count.

    The offending report is attached as ``report`` so callers can still
    print it.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class InconsistentBoundaryCondition(CasimirPlatesError):
    pass


class TailBoundUnachievable(CasimirPlatesError):
    pass


class IllConditionedFit(CasimirPlatesError):
    pass
