"""
Domain types for states, channels and the channel-state model.

All types are immutable once built and validate their invariants on
construction. Derived objects produced by trusted operations (reductions,
relabelings) skip the eigen-based checks through ``check=False``.
"""
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from qmask.core.config import get_settings
from qmask.core.linalg import (
    SubsystemShape,
    clipped_spectrum,
    partial_trace,
    permute_subsystems,
    permute_vector,
    tensor_product,
)
from qmask.exceptions import (
    CompletenessError,
    LabelError,
    NumericalError,
    PositivityError,
    PurityError,
    SymmetryError,
    TraceError,
)
from qmask.utils.validators import (
    hermitian_deviation,
    isometry_residual,
    validate_finite,
)

# Role labels used throughout the toolkit
E, E0, C, T = "E", "E0", "C", "T"
A, A_PRIME, B, K, C1 = "A", "A'", "B", "K", "C1"
M, M_HAT, R, G_A, G_B, J = "M", "M^", "R", "G_A", "G_B", "J"


def _as_matrix(m) -> np.ndarray:
    arr = np.asarray(m, dtype=complex)
    is_valid, message = validate_finite(arr)
    if not is_valid:
        raise NumericalError(message)
    return arr


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Positive semidefinite unit-trace operator on a labelled tensor space."""

    matrix: np.ndarray
    shape: SubsystemShape
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        m = _as_matrix(self.matrix)
        object.__setattr__(self, "matrix", m)
        if m.shape != (self.shape.dim, self.shape.dim):
            raise LabelError(
                f"matrix {m.shape} does not match shape dims {self.shape.dims}",
                self.shape.labels,
            )
        if self.check:
            settings = get_settings()
            deviation = hermitian_deviation(m)
            if deviation > settings.HERMITIAN_TOL:
                raise SymmetryError(deviation, settings.HERMITIAN_TOL)
            trace = float(np.trace(m).real)
            if abs(trace - 1.0) > settings.TRACE_TOL:
                raise TraceError(trace)
            evals, _ = np.linalg.eigh((m + m.conj().T) / 2)
            if evals.size and evals[0] < -settings.POSITIVITY_TOL:
                raise PositivityError(float(evals[0]), settings.POSITIVITY_TOL)

    @property
    def labels(self) -> Tuple[str, ...]:
        return self.shape.labels

    @property
    def dims(self) -> Tuple[int, ...]:
        return self.shape.dims

    @property
    def dim(self) -> int:
        return self.shape.dim

    def spectrum(self) -> np.ndarray:
        """Eigenvalues, descending, negatives within tolerance clipped to 0."""
        return clipped_spectrum(self.matrix)[0]

    def reduce(self, keep: Iterable[str]) -> "DensityOperator":
        keep = list(keep)
        return DensityOperator(
            partial_trace(self.matrix, self.shape, keep),
            self.shape.subset(keep),
            check=False,
        )

    def trace_out(self, labels: Iterable[str]) -> "DensityOperator":
        dropped = set(labels)
        return self.reduce([lab for lab in self.labels if lab not in dropped])

    def permute(self, order: Sequence[str]) -> "DensityOperator":
        return DensityOperator(
            permute_subsystems(self.matrix, self.shape, order),
            self.shape.reorder(order),
            check=False,
        )

    def relabel(self, mapping: Mapping[str, str]) -> "DensityOperator":
        return DensityOperator(self.matrix, self.shape.relabel(mapping), check=False)

    def tensor(self, other: "DensityOperator") -> "DensityOperator":
        return DensityOperator(
            tensor_product(self.matrix, other.matrix),
            self.shape.concat(other.shape),
            check=False,
        )

    @classmethod
    def maximally_mixed(cls, shape: SubsystemShape) -> "DensityOperator":
        return cls(np.eye(shape.dim, dtype=complex) / shape.dim, shape, check=False)

    @classmethod
    def basis_state(cls, shape: SubsystemShape, index: int) -> "DensityOperator":
        m = np.zeros((shape.dim, shape.dim), dtype=complex)
        m[index, index] = 1.0
        return cls(m, shape, check=False)


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit vector on a labelled tensor space."""

    amplitudes: np.ndarray
    shape: SubsystemShape

    def __post_init__(self):
        v = _as_matrix(self.amplitudes).reshape(-1)
        object.__setattr__(self, "amplitudes", v)
        if v.size != self.shape.dim:
            raise LabelError(
                f"{v.size} amplitudes for shape dims {self.shape.dims}",
                self.shape.labels,
            )
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > get_settings().TRACE_TOL:
            raise TraceError(norm**2)

    @classmethod
    def normalized(cls, amplitudes, shape: SubsystemShape) -> "PureState":
        v = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise PurityError("zero vector cannot be normalised")
        return cls(v / norm, shape)

    @property
    def labels(self) -> Tuple[str, ...]:
        return self.shape.labels

    def density(self) -> DensityOperator:
        v = self.amplitudes
        return DensityOperator(np.outer(v, v.conj()), self.shape, check=False)

    def reduce(self, keep: Iterable[str]) -> DensityOperator:
        return self.density().reduce(keep)

    def permute(self, order: Sequence[str]) -> "PureState":
        return PureState(
            permute_vector(self.amplitudes, self.shape, order),
            self.shape.reorder(order),
        )

    def relabel(self, mapping: Mapping[str, str]) -> "PureState":
        return PureState(self.amplitudes, self.shape.relabel(mapping))

    def tensor(self, other: "PureState") -> "PureState":
        return PureState(
            np.kron(self.amplitudes, other.amplitudes), self.shape.concat(other.shape)
        )


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Completely positive trace-preserving map given by Kraus operators."""

    kraus_ops: Tuple[np.ndarray, ...]
    in_shape: SubsystemShape
    out_shape: SubsystemShape
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        ops = tuple(_as_matrix(op) for op in self.kraus_ops)
        if not ops:
            raise CompletenessError(float("inf"), what="Kraus")
        object.__setattr__(self, "kraus_ops", ops)
        for op in ops:
            if op.shape != (self.out_shape.dim, self.in_shape.dim):
                raise LabelError(
                    f"Kraus operator {op.shape} does not map {self.in_shape.dims} "
                    f"to {self.out_shape.dims}"
                )
        if self.check:
            residual = self.completeness_residual()
            if residual > get_settings().TRACE_TOL:
                raise CompletenessError(residual, what="Kraus")

    def completeness_residual(self) -> float:
        total = sum(op.conj().T @ op for op in self.kraus_ops)
        return float(np.max(np.abs(total - np.eye(self.in_shape.dim))))

    @property
    def stacked(self) -> np.ndarray:
        """Kraus operators as an array of shape (rank, d_out, d_in)."""
        return np.stack(self.kraus_ops)

    @property
    def rank(self) -> int:
        return len(self.kraus_ops)

    def relabel(
        self,
        in_map: Optional[Mapping[str, str]] = None,
        out_map: Optional[Mapping[str, str]] = None,
    ) -> "KrausChannel":
        return KrausChannel(
            self.kraus_ops,
            self.in_shape.relabel(in_map or {}),
            self.out_shape.relabel(out_map or {}),
            check=False,
        )


@dataclass(frozen=True, eq=False)
class IsometricDilation:
    """Stinespring isometry; ``env_labels`` mark the environment outputs."""

    isometry: np.ndarray
    in_shape: SubsystemShape
    out_shape: SubsystemShape
    env_labels: Tuple[str, ...]

    def __post_init__(self):
        v = _as_matrix(self.isometry)
        object.__setattr__(self, "isometry", v)
        object.__setattr__(self, "env_labels", tuple(self.env_labels))
        if v.shape != (self.out_shape.dim, self.in_shape.dim):
            raise LabelError(
                f"isometry {v.shape} does not map {self.in_shape.dims} "
                f"to {self.out_shape.dims}"
            )
        self.out_shape.check_labels(self.env_labels)
        residual = isometry_residual(v)
        if residual > get_settings().TRACE_TOL:
            raise NumericalError("dilation is not an isometry", residual)

    @property
    def main_labels(self) -> Tuple[str, ...]:
        return tuple(lab for lab in self.out_shape.labels if lab not in self.env_labels)


@dataclass(frozen=True, eq=False)
class ChannelStateTriple:
    """
    The channel-state system over (E, E0, C), optionally purified by T.

    Each role is a group of labels so that tensor powers keep working:
    a two-letter triple has ``e_labels == ("E.1", "E.2")``.
    """

    state: DensityOperator
    e_labels: Tuple[str, ...] = (E,)
    e0_labels: Tuple[str, ...] = (E0,)
    c_labels: Tuple[str, ...] = (C,)
    t_labels: Tuple[str, ...] = ()

    def __post_init__(self):
        state = self.state
        if isinstance(state, PureState):
            state = state.density()
        object.__setattr__(self, "state", state)
        for name in ("e_labels", "e0_labels", "c_labels", "t_labels"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        expected = set(self.e_labels + self.e0_labels + self.c_labels + self.t_labels)
        if set(state.labels) != expected or len(state.labels) != len(expected):
            raise LabelError(
                f"triple labels must be exactly {sorted(expected)}", state.labels
            )

    @property
    def is_pure(self) -> bool:
        spectrum = self.state.spectrum()
        return bool(spectrum[0] >= 1.0 - 1e-9)

    @property
    def e_dim(self) -> int:
        return self.state.shape.dim_of(self.e_labels)

    @property
    def e0_dim(self) -> int:
        return self.state.shape.dim_of(self.e0_labels)

    @property
    def c_dim(self) -> int:
        return self.state.shape.dim_of(self.c_labels)

    def marginal(self, labels: Iterable[str]) -> DensityOperator:
        return self.state.reduce(labels)

    @property
    def state_labels(self) -> Tuple[str, ...]:
        """Labels standing for the channel state: T (when present) then E."""
        return self.t_labels + self.e_labels
