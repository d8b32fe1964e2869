"""Exception types raised by the package."""


class DegenerateSampleError(ValueError):
    """A sample has no spread (all observations equal) or too few points."""


class UnsupportedMethodError(ValueError):
    """The requested computation is not defined for the given tuning parameter."""


class NumericalError(ArithmeticError):
    """A matrix is singular or badly conditioned beyond repair."""


class ConvergenceError(RuntimeError):
    """The optimizer failed from every start point.

    The best iterate found is kept on ``best`` so callers can inspect it.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
