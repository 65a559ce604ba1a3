"""JSON documents for states and channels."""
from typing import List, Literal, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from qmask.core.linalg import SubsystemShape
from qmask.models.quantum import DensityOperator, KrausChannel, PureState

ComplexPair = Tuple[float, float]


def _encode(values: np.ndarray) -> List[ComplexPair]:
    flat = np.asarray(values, dtype=complex).reshape(-1)
    return [(float(z.real), float(z.imag)) for z in flat]


def _decode(pairs: List[ComplexPair]) -> np.ndarray:
    return np.array([complex(re, im) for re, im in pairs], dtype=complex)


class StateDocument(BaseModel):
    """A state as {labels, dims, entries} with entries as [re, im] pairs.

    Density operators store the row-major matrix, pure states the amplitudes.
    """

    model_config = ConfigDict(extra="forbid")

    kind: Literal["density", "pure"] = "density"
    labels: List[str]
    dims: List[int] = Field(..., min_length=0)
    entries: List[ComplexPair]

    @model_validator(mode="after")
    def check_sizes(self) -> "StateDocument":
        if len(self.labels) != len(self.dims):
            raise ValueError("labels and dims differ in length")
        if any(d < 1 for d in self.dims):
            raise ValueError("dims must be positive")
        dim = int(np.prod(self.dims)) if self.dims else 1
        expected = dim * dim if self.kind == "density" else dim
        if len(self.entries) != expected:
            raise ValueError(f"expected {expected} entries, got {len(self.entries)}")
        return self

    @classmethod
    def from_state(cls, state: Union[DensityOperator, PureState]) -> "StateDocument":
        if isinstance(state, PureState):
            return cls(
                kind="pure",
                labels=list(state.shape.labels),
                dims=list(state.shape.dims),
                entries=_encode(state.amplitudes),
            )
        return cls(
            kind="density",
            labels=list(state.shape.labels),
            dims=list(state.shape.dims),
            entries=_encode(state.matrix),
        )

    def to_state(self) -> Union[DensityOperator, PureState]:
        shape = SubsystemShape(tuple(self.labels), tuple(self.dims))
        values = _decode(self.entries)
        if self.kind == "pure":
            return PureState(values, shape)
        return DensityOperator(values.reshape(shape.dim, shape.dim), shape)


class ChannelDocument(BaseModel):
    """A channel as a Kraus list over labelled input and output spaces."""

    model_config = ConfigDict(extra="forbid")

    in_labels: List[str]
    in_dims: List[int]
    out_labels: List[str]
    out_dims: List[int]
    kraus: List[List[ComplexPair]] = Field(..., min_length=1)

    @model_validator(mode="after")
    def check_sizes(self) -> "ChannelDocument":
        d_in = int(np.prod(self.in_dims)) if self.in_dims else 1
        d_out = int(np.prod(self.out_dims)) if self.out_dims else 1
        for i, op in enumerate(self.kraus):
            if len(op) != d_in * d_out:
                raise ValueError(f"kraus[{i}] needs {d_in * d_out} entries")
        return self

    @classmethod
    def from_channel(cls, ch: KrausChannel) -> "ChannelDocument":
        return cls(
            in_labels=list(ch.in_shape.labels),
            in_dims=list(ch.in_shape.dims),
            out_labels=list(ch.out_shape.labels),
            out_dims=list(ch.out_shape.dims),
            kraus=[_encode(op) for op in ch.kraus_ops],
        )

    def to_channel(self) -> KrausChannel:
        in_shape = SubsystemShape(tuple(self.in_labels), tuple(self.in_dims))
        out_shape = SubsystemShape(tuple(self.out_labels), tuple(self.out_dims))
        ops = tuple(
            _decode(op).reshape(out_shape.dim, in_shape.dim) for op in self.kraus
        )
        return KrausChannel(ops, in_shape, out_shape)
