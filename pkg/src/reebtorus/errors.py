"""Exception hierarchy shared by all modules."""


class ReebTorusError(Exception):
    """Base class for every error raised by this package."""


class TransversalityViolation(ReebTorusError):
    pass


class UnsupportedSet(ReebTorusError):
    pass


class InvarianceViolation(ReebTorusError):
    pass


class DomainError(ReebTorusError, ValueError):
    pass


class NotPositiveDefinite(ReebTorusError):
    pass


class MarginNegative(ReebTorusError):
    def __init__(self, margin, witness):
        super().__init__(f"Q^b[2] - (1+C) margin {margin:.6g} at r={list(witness)}")
        self.margin = margin
        self.witness = witness


class SearchExhausted(ReebTorusError):
    pass


class ConstraintViolation(ReebTorusError, ValueError):
    pass


class InfeasibleRamp(ReebTorusError):
    pass


class ShellViolation(ReebTorusError):
    def __init__(self, deviation, witness):
        super().__init__(f"|H - 1| = {deviation:.3g} on the support shell at {list(witness)}")
        self.deviation = deviation
        self.witness = witness


class IntegrationError(ReebTorusError):
    """Integrator failure; ``trace`` holds the orbit up to the last good state."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class StepLimit(IntegrationError):
    pass


class StepUnderflow(IntegrationError):
    pass


class MonotonicityViolation(ReebTorusError):
    def __init__(self, rate, witness):
        super().__init__(f"dz(X) = {rate:.3g} <= 0 at {list(witness)}")
        self.rate = rate
        self.witness = witness


class NoBracket(ReebTorusError):
    pass
