class LatcoverError(Exception):
    pass


class DimensionMismatch(LatcoverError, ValueError):
    pass


class NotPrime(LatcoverError, ValueError):
    pass


class UnboundedGauge(LatcoverError, ValueError):
    """The point is outside the span of the body."""


class DomainError(LatcoverError, ValueError):
    pass


class BudgetExceeded(LatcoverError, RuntimeError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class MissingSmoothness(LatcoverError, ValueError):
    pass


class MissingSandwich(LatcoverError, ValueError):
    pass


class InvalidCovering(LatcoverError, ValueError):
    pass


class Infeasible(LatcoverError, ValueError):
    pass


class NoCertifiedSparsifier(LatcoverError, RuntimeError):
    pass
