"""Exception hierarchy shared by every module of the package."""


class TwoPlaneError(Exception):
    """Base class for all package errors."""


class ValidationError(TwoPlaneError, ValueError):
    """An input violates a documented invariant or precondition."""


class BadParam(ValidationError):
    pass


class DegenerateSegment(ValidationError):
    pass


class AllParallel(ValidationError):
    pass


class DegenerateQuad(ValidationError):
    pass


class AtInfinity(TwoPlaneError, ArithmeticError):
    pass


class NonPositiveSaliency(ValidationError):
    pass


class MonotonicityViolation(TwoPlaneError, AssertionError):
    """An axis map came out non-monotone. Signals a bug or a pathological kernel width."""


class OutOfBounds(ValidationError):
    pass


class ClampBoundary(ValidationError):
    pass


class CacheCorrupt(TwoPlaneError):
    pass


class TooShort(ValidationError):
    pass


class DegenerateTrack(ValidationError):
    pass


class SizeMismatch(ValidationError):
    pass
