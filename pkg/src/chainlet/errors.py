"""Exception types shared across the package."""


class ChainletError(Exception):
    """Base class for all package errors."""


class ContractViolation(ChainletError, ValueError):
    """Raised when arguments break an operation's preconditions."""


class UnsupportedGrade(ChainletError):
    """Raised for grades the requested operation does not handle."""


class InsufficientOrder(ChainletError):
    """Raised when a form lacks the derivative order an operation needs."""


class UnsupportedOrder(ChainletError):
    """Raised when an element operation is not defined for higher-order terms."""


class NotSimple(ChainletError, ValueError):
    """Raised when a k-vector must be simple but is not."""


class CertificateMismatch(ChainletError):
    """Raised when a decomposition certificate does not reassemble its chain."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class FlowError(ChainletError):
    """Raised when flow integration produces non-finite values."""


class QuadratureWarning(UserWarning):
    """Quadrature degree may be too low for the requested exactness."""
