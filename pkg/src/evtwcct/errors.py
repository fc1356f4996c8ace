"""Exception types shared across the package."""


class EvtError(Exception):
    """Base class for every error raised by evtwcct."""


class ParseError(EvtError, ValueError):
    def __init__(self, row, reason):
        self.row = row
        self.reason = reason
        super().__init__(f"row {row}: {reason}")


class EmptyTrace(EvtError, ValueError):
    pass


class OutOfRange(EvtError, IndexError):
    pass


class DegenerateTrace(EvtError, ValueError):
    """The trace has zero spread, so no tail can be defined."""


class NoValidThreshold(EvtError):
    """Threshold scan reached its floor without an acceptable fit."""

    def __init__(self, message, trail=None):
        super().__init__(message)
        self.trail = list(trail or [])


class TooFewExceedances(EvtError, ValueError):
    pass


class OutOfSupport(EvtError, ValueError):
    pass


class FitDiverged(EvtError):
    pass


class SingularInformation(EvtError):
    """Observed information matrix could not be inverted."""


class BelowThreshold(EvtError, ValueError):
    pass


class InfinitePeriod(EvtError):
    """Level lies beyond the finite upper endpoint of the fitted tail."""


class MissingHorizon(EvtError, KeyError):
    pass


class InvalidTheta(EvtError, ValueError):
    pass


class InvalidBayesFactor(EvtError, ValueError):
    pass


class AlreadyAccepted(EvtError):
    pass


class NeverAccepted(EvtError):
    """The sequential monitor did not accept within the available samples."""


class TooFewObservations(EvtError, ValueError):
    pass


class NumericBlowup(EvtError, ArithmeticError):
    pass


class AllRunsFailed(EvtError):
    pass
