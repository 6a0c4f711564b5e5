"""Exception hierarchy shared by the forward and inverse solvers."""


class ScatteringError(Exception):
    """Base class for all errors raised by sepscatter."""


class QuadratureError(ScatteringError):
    """An adaptive quadrature did not reach its tolerance."""


class Condition7Violation(ScatteringError):
    """The resolvent denominator 1 + lambda (R0 psi0, psi0) vanishes on a shell."""


class ZeroDenominator(ScatteringError):
    """2q + i pi (1+S) xi vanishes while xi does not."""


class OriginHit(ScatteringError):
    """The curve i q F(q) + 2 pi passes through (or too close to) the origin."""

    def __init__(self, message, min_abs=None, q=None):
        super().__init__(message)
        self.min_abs = min_abs
        self.q = q


class UnderResolved(ScatteringError):
    """Consecutive curve samples turn by pi/2 or more; the grid is too coarse."""


class ConditionsViolated(ScatteringError):
    """Uniqueness hypotheses fail (origin hit or negative index)."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NonConvergence(ScatteringError):
    """An iterative solver stopped above its tolerance."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NotContractive(ScatteringError):
    """The fixed-point multiplier has sup-modulus >= 1 on [A, inf)."""


class SignInconsistent(ScatteringError):
    """The recovered spectral density changes sign beyond the tolerance band."""


class NoPotential(ScatteringError):
    """The spectral density vanishes identically, so V = 0."""
