"""
Exception hierarchy shared by the numeric library and the CLI
"""

from typing import Optional


class ForkPINNError(Exception):
    """Base class for every error raised on purpose by this package."""
    exit_code = 2


class ConfigValidationError(ForkPINNError, ValueError):
    """Invalid experiment configuration or command-line input."""
    exit_code = 1


class DimensionError(ForkPINNError, ValueError):
    """Matrix, feature or grid shapes that do not fit together."""
    exit_code = 1


class NumericalError(ForkPINNError, ArithmeticError):
    """A computation produced or met a value it cannot work with."""
    exit_code = 2


class ConvergenceError(NumericalError):
    """An iterative method stopped before reaching its tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class UnphysicalStateError(NumericalError):
    """A density matrix with an eigenvalue below the allowed floor."""

    def __init__(self, message: str, eigenvalue: Optional[float] = None):
        if eigenvalue is not None:
            message = f"{message} (min eigenvalue {eigenvalue:.3e})"
        super().__init__(message)
        self.eigenvalue = eigenvalue


class IntegrationError(NumericalError):
    """Non-finite values met while integrating."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} at t={time:.6g}")
        self.time = time


class TrainingAbortedError(NumericalError):
    """Training stopped because the loss left the finite range."""

    def __init__(self, message: str, epoch: int):
        super().__init__(f"{message} at epoch {epoch}")
        self.epoch = epoch
