"""Exception hierarchy for the tracking library."""


class TrackingError(Exception):
    """Base class for all library errors."""


class SingularMatrix(TrackingError, ArithmeticError):
    """A pivot fell below the relative pivot threshold during LU factorization."""

    def __init__(self, message="matrix is numerically singular", column=None):
        super().__init__(message)
        self.column = column


class SingularJacobian(SingularMatrix):
    """The Jacobian F_u is numerically singular at the current point."""


class NonFiniteValue(TrackingError, FloatingPointError):
    """An evaluator returned NaN or Inf."""


class DimensionMismatch(TrackingError, ValueError):
    pass


class NewtonDiverged(TrackingError):
    """Newton's method did not converge within its budget or stopped contracting."""

    def __init__(self, message, iterations=0):
        super().__init__(message)
        self.iterations = iterations


class StepFailed(TrackingError):
    """Every perturbation mask was rejected at one stochastic grid point."""

    def __init__(self, message, k=None, p=None):
        super().__init__(message)
        self.k = k
        self.p = p
