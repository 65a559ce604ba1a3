import logging
from typing import Any, Dict, Iterable, Optional

logger = logging.getLogger(__name__)

# CLI exit codes
EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DIMENSION = 3
EXIT_NUMERICAL = 4


class QMaskException(Exception):
    """Base exception for the qmask toolkit"""

    def __init__(
        self,
        message: str,
        exit_code: int = EXIT_NUMERICAL,
        details: Optional[Dict[str, Any]] = None,
    ):
        self.message = message
        self.exit_code = exit_code
        self.details = details or {}
        super().__init__(self.message)

    def to_dict(self) -> Dict[str, Any]:
        """Machine-readable form used for error JSON."""
        return {
            "error": type(self).__name__,
            "message": self.message,
            "exit_code": self.exit_code,
            "details": self.details,
        }


class DimensionLimitError(QMaskException):
    """Raised when a total Hilbert-space dimension exceeds the configured cap"""

    def __init__(self, dimension: int, cap: int, what: str = "tensor product"):
        super().__init__(
            message=f"{what} dimension {dimension} exceeds cap {cap}",
            exit_code=EXIT_DIMENSION,
            details={"dimension": dimension, "cap": cap, "what": what},
        )


class LabelError(QMaskException):
    """Raised when subsystem labels are unknown, duplicated or mismatched"""

    def __init__(self, message: str, labels: Optional[Iterable[str]] = None):
        details = {}
        if labels is not None:
            details["labels"] = list(labels)
        super().__init__(message=f"Label error: {message}", details=details)


class SymmetryError(QMaskException):
    """Raised when a matrix expected to be Hermitian is not"""

    def __init__(self, deviation: float, tolerance: float):
        super().__init__(
            message=f"Matrix is not Hermitian (max |m - m^dag| = {deviation:.3e})",
            details={"deviation": deviation, "tolerance": tolerance},
        )


class PositivityError(QMaskException):
    """Raised when an operator has an eigenvalue below the positivity tolerance"""

    def __init__(self, min_eigenvalue: float, tolerance: float):
        super().__init__(
            message=f"Operator is not positive (min eigenvalue {min_eigenvalue:.3e})",
            details={"min_eigenvalue": min_eigenvalue, "tolerance": tolerance},
        )


class TraceError(QMaskException):
    """Raised when a density operator does not have unit trace"""

    def __init__(self, trace: float):
        super().__init__(
            message=f"Density operator trace is {trace:.12g}, expected 1",
            details={"trace": trace},
        )


class ProbabilityError(QMaskException):
    """Raised when a probability vector is invalid"""

    def __init__(self, message: str):
        super().__init__(message=f"Invalid probability vector: {message}")


class CompletenessError(QMaskException):
    """Raised when Kraus operators or POVM elements do not sum to the identity"""

    def __init__(self, residual: float, what: str = "POVM"):
        super().__init__(
            message=f"{what} completeness residual {residual:.3e}",
            details={"residual": residual, "what": what},
        )


class QueryError(QMaskException):
    """Raised when an entropy query has empty or overlapping groups"""

    def __init__(self, message: str):
        super().__init__(message=f"Entropy query error: {message}")


class DomainError(QMaskException):
    """Raised when a scalar argument lies outside its domain"""

    def __init__(self, name: str, value: float, low: float, high: float):
        super().__init__(
            message=f"{name}={value} outside [{low}, {high}]",
            details={"name": name, "value": value, "low": low, "high": high},
        )


class ConditioningError(QMaskException):
    """Raised when a conditioning operator is rank deficient"""

    def __init__(self, min_eigenvalue: float):
        super().__init__(
            message=f"sigma_B is rank deficient (min eigenvalue {min_eigenvalue:.3e})",
            details={"min_eigenvalue": min_eigenvalue},
        )


class PurityError(QMaskException):
    """Raised when a pure state is required but a mixed one is given"""

    def __init__(self, message: str = "State is not pure"):
        super().__init__(message=message)


class EmbeddingError(QMaskException):
    """Raised when a target space is too small for an isometric embedding"""

    def __init__(self, needed: int, available: int):
        super().__init__(
            message=f"Target dimension {available} below required rank {needed}",
            details={"needed": needed, "available": available},
        )


class ConstraintError(QMaskException):
    """Raised when an input candidate violates rho_EC = phi_EC"""

    def __init__(self, residual: float):
        super().__init__(
            message=f"Candidate violates the channel-state constraint "
            f"(residual {residual:.3e})",
            details={"residual": residual},
        )


class SpecError(QMaskException):
    """Raised when a channel specification violates its structural invariants"""

    def __init__(self, message: str, residual: Optional[float] = None):
        details = {}
        if residual is not None:
            details["residual"] = residual
        super().__init__(message=f"Invalid channel spec: {message}", details=details)


class ConfigurationError(QMaskException):
    """Raised when a run is configured inconsistently"""

    def __init__(self, message: str):
        super().__init__(message=f"Configuration error: {message}")


class ManifestValidationError(QMaskException):
    """Raised when a run manifest fails validation"""

    def __init__(self, message: str, errors: Optional[list] = None):
        super().__init__(
            message=message,
            exit_code=EXIT_VALIDATION,
            details={"errors": errors or []},
        )


class NumericalError(QMaskException):
    """Raised when a numerical postcondition fails"""

    def __init__(self, message: str, residual: Optional[float] = None):
        details = {}
        if residual is not None:
            details["residual"] = residual
        super().__init__(
            message=f"Numerical failure: {message}",
            exit_code=EXIT_NUMERICAL,
            details=details,
        )
