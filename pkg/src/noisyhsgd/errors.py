"""Exception types raised across the package."""


class HsgdError(Exception):
    """Base class for all package errors."""


class NotSymmetric(HsgdError, ValueError):
    pass


class NegativeEigenvalue(HsgdError, ValueError):
    pass


class TimeOrder(HsgdError, ValueError):
    pass


class DimensionMismatch(HsgdError, ValueError):
    pass


class ExhaustedData(HsgdError, ValueError):
    """More SGD steps were requested than there are records."""


class HorizonExceeded(HsgdError, ValueError):
    """A query time lies beyond the solved risk-curve horizon."""


class UnstableStep(HsgdError, ArithmeticError):
    """Volterra diagonal factor is nonpositive; the grid is too coarse."""


class MixtureNotPD(HsgdError, ArithmeticError):
    """The alpha-mixture covariance is not positive definite.

    The Renyi divergence of this order is infinite (or undefined) for the
    given pair of Gaussians.
    """

    def __init__(self, message, s=None, alpha=None, pair_index=None):
        super().__init__(message)
        self.s = s
        self.alpha = alpha
        self.pair_index = pair_index


class SingularCovariance(HsgdError, ArithmeticError):
    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue
