"""Exception hierarchy for the microcell toolkit."""

from typing import Optional, Sequence

from config import EXIT_VALIDATION, EXIT_INFEASIBLE


class MicroCellError(Exception):
    """Base class for all toolkit errors."""

    exit_code = EXIT_VALIDATION


class ValidationError(MicroCellError, ValueError):
    """Input or configuration violates a type invariant."""

    exit_code = EXIT_VALIDATION


class OutOfRangeError(ValidationError):
    """Current density outside the polarization model domain."""


class InfeasibleError(MicroCellError):
    """The requested operation has no admissible solution."""

    exit_code = EXIT_INFEASIBLE


class InfeasibleLoadError(InfeasibleError):
    """Constant-power demand above what the system can deliver."""

    def __init__(self, message: str, max_power: float):
        super().__init__(message)
        self.max_power = max_power


class CapacityExhaustedError(InfeasibleError):
    """The galvanic cell has no charge left."""


class CalibrationError(MicroCellError):
    """Polarization fit did not meet its targets."""

    exit_code = EXIT_INFEASIBLE

    def __init__(self, message: str, params=None, residual: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.params = params
        self.residual = residual
