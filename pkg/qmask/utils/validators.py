"""
Numerical validation utilities.

Each validator returns ``(is_valid, message)`` so callers decide whether a
failure is fatal; the domain models turn failures into the matching
``QMaskException``.
"""
from typing import Iterable, Sequence, Tuple

import numpy as np

# Default tolerances; callers normally pass values from Settings
HERMITIAN_TOL = 1e-10
POSITIVITY_TOL = 1e-9
TRACE_TOL = 1e-9
PROBABILITY_TOL = 1e-12


def validate_finite(m: np.ndarray) -> Tuple[bool, str]:
    """Validate that every entry is finite (no NaN/Inf)."""
    if not np.all(np.isfinite(m)):
        return False, "Matrix contains NaN or Inf entries"
    return True, "Matrix entries are finite"


def validate_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> Tuple[bool, str]:
    """
    Validate Hermiticity entrywise.

    Args:
        m: Square matrix
        tol: Maximum allowed |m - m^dag| entry

    Returns:
        Tuple of (is_valid, message)
    """
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False, f"Matrix of shape {m.shape} is not square"
    deviation = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    if deviation > tol:
        return False, f"max |m - m^dag| = {deviation:.3e} exceeds {tol:.1e}"
    return True, "Matrix is Hermitian"


def hermitian_deviation(m: np.ndarray) -> float:
    """Largest entrywise deviation from Hermiticity."""
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def validate_positive(
    eigenvalues: Sequence[float], tol: float = POSITIVITY_TOL
) -> Tuple[bool, str]:
    """Validate that the smallest eigenvalue is not below -tol."""
    smallest = float(np.min(eigenvalues)) if len(eigenvalues) else 0.0
    if smallest < -tol:
        return False, f"Smallest eigenvalue {smallest:.3e} below {-tol:.1e}"
    return True, "Operator is positive semidefinite"


def validate_unit_trace(m: np.ndarray, tol: float = TRACE_TOL) -> Tuple[bool, str]:
    """Validate Tr(m) = 1 within tol."""
    trace = complex(np.trace(m))
    if abs(trace - 1.0) > tol:
        return False, f"Trace {trace.real:.12g} differs from 1"
    return True, "Unit trace"


def validate_probability_vector(
    q: Iterable[float], tol: float = PROBABILITY_TOL
) -> Tuple[bool, str]:
    """
    Validate a probability vector.

    Validates:
    - At least one entry
    - Entries are finite and nonnegative
    - Entries sum to 1 within tol
    """
    values = np.asarray(list(q), dtype=float)
    if values.size == 0:
        return False, "Probability vector is empty"
    if not np.all(np.isfinite(values)):
        return False, "Probability vector has non-finite entries"
    if np.any(values < 0):
        return False, f"Negative entry {float(values.min())}"
    total = float(values.sum())
    if abs(total - 1.0) > tol:
        return False, f"Entries sum to {total:.15g}"
    return True, "Valid probability vector"


def validate_completeness(
    elements: Sequence[np.ndarray], dim: int, tol: float = TRACE_TOL
) -> Tuple[bool, float]:
    """
    Check sum_j E_j = I for POVM elements.

    Returns:
        Tuple of (is_valid, residual) where residual is the max entry deviation
    """
    total = np.zeros((dim, dim), dtype=complex)
    for e in elements:
        total = total + e
    residual = float(np.max(np.abs(total - np.eye(dim)))) if dim else 0.0
    return residual <= tol, residual


def isometry_residual(v: np.ndarray) -> float:
    """Max-entry deviation of V^dag V from the identity."""
    cols = v.shape[1]
    return float(np.max(np.abs(v.conj().T @ v - np.eye(cols)))) if cols else 0.0


def validate_unique_labels(labels: Sequence[str]) -> Tuple[bool, str]:
    """Validate that subsystem labels are unique and nonempty strings."""
    if any(not isinstance(label, str) or not label for label in labels):
        return False, "Labels must be nonempty strings"
    if len(set(labels)) != len(labels):
        seen = set()
        dupes = sorted({x for x in labels if x in seen or seen.add(x)})
        return False, f"Duplicate labels: {', '.join(dupes)}"
    return True, "Labels are unique"
