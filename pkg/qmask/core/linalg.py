"""
Dense complex linear algebra over tensor-factored Hilbert spaces.

Matrices are plain ``numpy`` complex arrays. Tensor structure travels next to
them as a ``SubsystemShape`` so that every operation addresses subsystems by
label rather than by axis index.
"""
import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from qmask.core.config import get_settings
from qmask.exceptions import (
    DimensionLimitError,
    DomainError,
    LabelError,
    PositivityError,
    SymmetryError,
)
from qmask.utils.validators import hermitian_deviation, validate_unique_labels

logger = logging.getLogger(__name__)

SeedLike = Union[None, int, np.random.SeedSequence, np.random.Generator]

INFIDELITY_FLOOR = 1e-12


@dataclass(frozen=True)
class SubsystemShape:
    """Ordered labels and local dimensions of a tensor-factored space."""

    labels: Tuple[str, ...]
    dims: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if len(self.labels) != len(self.dims):
            raise LabelError(
                f"{len(self.labels)} labels for {len(self.dims)} dims", self.labels
            )
        is_valid, message = validate_unique_labels(self.labels)
        if not is_valid:
            raise LabelError(message, self.labels)
        if any(d < 1 for d in self.dims):
            raise LabelError(f"dimensions must be positive, got {self.dims}")

    @classmethod
    def of(cls, *pairs: Tuple[str, int]) -> "SubsystemShape":
        """Build from ``(label, dim)`` pairs."""
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    @classmethod
    def empty(cls) -> "SubsystemShape":
        return cls((), ())

    @property
    def dim(self) -> int:
        return int(math.prod(self.dims))

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LabelError(f"unknown label {label!r}", self.labels) from None

    def dim_of(self, labels: Iterable[str]) -> int:
        """Product of the local dimensions of ``labels``."""
        return int(math.prod(self.dims[self.index(label)] for label in labels))

    def pairs(self) -> List[Tuple[str, int]]:
        return list(zip(self.labels, self.dims))

    def check_labels(self, labels: Iterable[str]) -> None:
        """Raise ``LabelError`` if any label is not part of this shape."""
        unknown = [label for label in labels if label not in self.labels]
        if unknown:
            raise LabelError(f"unknown labels {unknown}", self.labels)

    def subset(self, labels: Iterable[str]) -> "SubsystemShape":
        """Sub-shape over ``labels`` in this shape's order."""
        wanted = set(labels)
        self.check_labels(wanted)
        return SubsystemShape.of(*[p for p in self.pairs() if p[0] in wanted])

    def without(self, labels: Iterable[str]) -> "SubsystemShape":
        dropped = set(labels)
        self.check_labels(dropped)
        return SubsystemShape.of(*[p for p in self.pairs() if p[0] not in dropped])

    def reorder(self, order: Sequence[str]) -> "SubsystemShape":
        if sorted(order) != sorted(self.labels):
            raise LabelError(f"order {list(order)} is not a permutation", self.labels)
        pairs = [(label, self.dims[self.index(label)]) for label in order]
        return SubsystemShape.of(*pairs)

    def concat(self, other: "SubsystemShape") -> "SubsystemShape":
        clash = set(self.labels) & set(other.labels)
        if clash:
            raise LabelError(f"labels {sorted(clash)} appear on both factors")
        return SubsystemShape(self.labels + other.labels, self.dims + other.dims)

    def relabel(self, mapping: Mapping[str, str]) -> "SubsystemShape":
        self.check_labels(mapping.keys())
        return SubsystemShape(
            tuple(mapping.get(label, label) for label in self.labels), self.dims
        )

    def suffixed(self, suffix: str) -> "SubsystemShape":
        return SubsystemShape(tuple(f"{lab}{suffix}" for lab in self.labels), self.dims)


def check_dimension(dim: int, cap: Optional[int] = None, what: str = "tensor product"):
    """Raise ``DimensionLimitError`` when ``dim`` exceeds ``cap`` (default DIM_CAP)."""
    limit = get_settings().DIM_CAP if cap is None else cap
    if dim > limit:
        raise DimensionLimitError(dim, limit, what)


def tensor_product(
    a: np.ndarray, b: np.ndarray, cap: Optional[int] = None
) -> np.ndarray:
    """Kronecker product, refusing results beyond the dimension cap."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    check_dimension(max(a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]), cap)
    return np.kron(a, b)


def _transpose_axes(shape: SubsystemShape, front: Sequence[int], back: Sequence[int]):
    n = len(shape)
    order = list(front) + list(back)
    return order + [n + i for i in order]


def partial_trace(
    m: np.ndarray, shape: SubsystemShape, keep: Iterable[str]
) -> np.ndarray:
    """
    Trace out every subsystem not in ``keep``.

    The kept factors appear in the order of ``shape``.
    """
    keep = set(keep)
    shape.check_labels(keep)
    if m.shape != (shape.dim, shape.dim):
        raise LabelError(f"matrix of shape {m.shape} does not match {shape.dims}")
    kept = [i for i, label in enumerate(shape.labels) if label in keep]
    traced = [i for i, label in enumerate(shape.labels) if label not in keep]
    if not traced:
        return m
    dk = int(math.prod(shape.dims[i] for i in kept))
    dt = int(math.prod(shape.dims[i] for i in traced))
    axes = _transpose_axes(shape, kept, traced)
    t = m.reshape(shape.dims + shape.dims).transpose(axes)
    return np.einsum("ajbj->ab", t.reshape(dk, dt, dk, dt))


def permute_subsystems(
    m: np.ndarray, shape: SubsystemShape, order: Sequence[str]
) -> np.ndarray:
    """Reorder tensor factors of a square operator to ``order``."""
    target = shape.reorder(order)
    if target.labels == shape.labels:
        return m
    idx = [shape.index(label) for label in order]
    t = m.reshape(shape.dims + shape.dims).transpose(_transpose_axes(shape, idx, []))
    return t.reshape(shape.dim, shape.dim)


def permute_vector(
    v: np.ndarray, shape: SubsystemShape, order: Sequence[str]
) -> np.ndarray:
    """Reorder tensor factors of a state vector to ``order``."""
    shape.reorder(order)
    idx = [shape.index(label) for label in order]
    return v.reshape(shape.dims).transpose(idx).reshape(shape.dim)


def hermitian_eig(
    m: np.ndarray, tol: Optional[float] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigendecomposition of a Hermitian matrix.

    Returns:
        (eigenvalues in descending order, unitary whose columns are eigenvectors)

    Raises:
        SymmetryError: if max |m - m^dag| exceeds the Hermiticity tolerance
    """
    tol = get_settings().HERMITIAN_TOL if tol is None else tol
    deviation = hermitian_deviation(m)
    if deviation > tol:
        raise SymmetryError(deviation, tol)
    evals, evecs = np.linalg.eigh((m + m.conj().T) / 2)
    return evals[::-1].copy(), evecs[:, ::-1].copy()


def trace_norm(m: np.ndarray) -> float:
    """Sum of singular values."""
    if m.size == 0:
        return 0.0
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Half the trace norm of the difference."""
    return 0.5 * trace_norm(rho - sigma)


def clipped_spectrum(
    m: np.ndarray, tol: Optional[float] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigendecomposition of a positive semidefinite matrix.

    Eigenvalues in [-tol, 0) are clipped to zero; anything lower raises
    ``PositivityError``.
    """
    tol = get_settings().POSITIVITY_TOL if tol is None else tol
    evals, evecs = hermitian_eig(m)
    if evals.size and evals[-1] < -tol:
        raise PositivityError(float(evals[-1]), tol)
    return np.clip(evals, 0.0, None), evecs


def matrix_sqrt(m: np.ndarray) -> np.ndarray:
    """Principal square root of a positive semidefinite matrix."""
    evals, evecs = clipped_spectrum(m)
    return (evecs * np.sqrt(evals)) @ evecs.conj().T


def inverse_sqrt(m: np.ndarray) -> np.ndarray:
    """m^{-1/2} for a full-rank positive matrix."""
    evals, evecs = clipped_spectrum(m)
    return (evecs / np.sqrt(evals)) @ evecs.conj().T


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Root fidelity ||sqrt(rho) sqrt(sigma)||_1."""
    return trace_norm(matrix_sqrt(rho) @ matrix_sqrt(sigma))


def pure_fidelity_distance(psi: np.ndarray, sigma: np.ndarray) -> float:
    """
    sqrt(1 - <psi|sigma|psi>) for a unit vector ``psi``.

    Infidelities at or below ``INFIDELITY_FLOOR`` are round-off and read as 0.
    """
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    overlap = float(np.real(np.vdot(psi, sigma @ psi)))
    infidelity = 1.0 - min(1.0, overlap)
    if infidelity <= INFIDELITY_FLOOR:
        return 0.0
    return float(math.sqrt(infidelity))


def fidelity_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """
    sqrt(1 - F^2), clamped into [0, 1].

    A rank-one ``rho`` goes through ``pure_fidelity_distance`` so that exact
    agreement is not inflated to sqrt(round-off).
    """
    evals, evecs = clipped_spectrum(rho)
    if evals.size and evals[0] >= 1.0 - INFIDELITY_FLOOR:
        return pure_fidelity_distance(evecs[:, 0], sigma)
    f = min(1.0, fidelity(rho, sigma))
    infidelity = 1.0 - f * f
    if infidelity <= INFIDELITY_FLOOR:
        return 0.0
    return float(math.sqrt(infidelity))


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Generator from an int, a SeedSequence or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def haar_unitary(dim: int, seed: SeedLike = None) -> np.ndarray:
    """
    Haar-random unitary.

    QR decomposition of a complex Ginibre matrix with the phases of R's
    diagonal moved into Q, which makes the distribution exactly Haar.
    """
    if dim < 1:
        raise DomainError("dim", dim, 1, get_settings().DIM_CAP)
    rng = make_rng(seed)
    real = rng.standard_normal((dim, dim))
    imag = rng.standard_normal((dim, dim))
    z = (real + 1j * imag) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def haar_vector(dim: int, seed: SeedLike = None) -> np.ndarray:
    """Haar-random unit vector (first column of a Haar unitary)."""
    if dim < 1:
        raise DomainError("dim", dim, 1, get_settings().DIM_CAP)
    rng = make_rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_density_matrix(
    dim: int, seed: SeedLike = None, rank: Optional[int] = None
) -> np.ndarray:
    """Random density matrix from the induced (Ginibre) measure."""
    rng = make_rng(seed)
    k = dim if rank is None else rank
    g = rng.standard_normal((dim, k)) + 1j * rng.standard_normal((dim, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(dim: int, seed: SeedLike = None) -> np.ndarray:
    rng = make_rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (g + g.conj().T) / 2


def hermitian_basis(dim: int) -> List[np.ndarray]:
    """
    Traceless Hermitian basis (generalised Gell-Mann matrices).

    For dim=2 the order is X, Y, Z.
    """
    basis = []
    for j in range(dim):
        for k in range(j + 1, dim):
            sym = np.zeros((dim, dim), dtype=complex)
            sym[j, k] = sym[k, j] = 1.0
            anti = np.zeros((dim, dim), dtype=complex)
            anti[j, k] = -1j
            anti[k, j] = 1j
            basis.extend([sym, anti])
    for level in range(1, dim):
        diag = np.zeros(dim)
        diag[:level] = 1.0
        diag[level] = -level
        scale = math.sqrt(2.0 / (level * (level + 1)))
        basis.append(np.diag(scale * diag).astype(complex))
    return basis
