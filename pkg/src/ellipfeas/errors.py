"""Exception types raised by the solver components."""


class EllipfeasError(Exception):
    pass


class NotPositiveDefinite(EllipfeasError):
    """A Cholesky pivot fell below the positive-definiteness floor."""


class DowndateIndefinite(NotPositiveDefinite):
    """A rank-one downdate would leave the matrix (numerically) indefinite."""


class InvalidInput(EllipfeasError, ValueError):
    pass


class DegenerateDirection(EllipfeasError):
    """The ellipsoid has (numerically) zero width along the requested normal."""


class NonPositiveF(EllipfeasError):
    """f(d, l) <= 0, so the quadratic does not describe a proper ellipsoid."""


class NegativeWeight(EllipfeasError):
    pass


class Degenerate(EllipfeasError):
    pass


class PhiUndefined(EllipfeasError):
    pass


class Unsupported(EllipfeasError):
    pass


class InsufficientData(EllipfeasError):
    pass


class RetryExhausted(EllipfeasError):
    pass


class AmbiguousOutcome(EllipfeasError):
    pass
