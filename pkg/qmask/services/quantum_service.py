"""
Channel application, dilations and the channel-state model.

Functions here are pure: they never mutate their inputs and every returned
object is a fresh immutable value, so they can be shared across worker
threads.
"""
import logging
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from qmask.core.config import get_settings
from qmask.core.linalg import (
    SeedLike,
    SubsystemShape,
    check_dimension,
    clipped_spectrum,
    haar_vector,
    make_rng,
    permute_vector,
    random_density_matrix,
)
from qmask.exceptions import (
    CompletenessError,
    DomainError,
    LabelError,
    PositivityError,
    ProbabilityError,
    PurityError,
)
from qmask.models.quantum import (
    A,
    B,
    C,
    E,
    E0,
    K,
    T,
    ChannelStateTriple,
    DensityOperator,
    IsometricDilation,
    KrausChannel,
    PureState,
)
from qmask.utils.validators import (
    validate_completeness,
    validate_positive,
    validate_probability_vector,
)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Applying maps
# ---------------------------------------------------------------------------


def apply_channel(
    ch: KrausChannel, rho: DensityOperator, acting_on: Optional[Iterable[str]] = None
) -> DensityOperator:
    """
    Apply ``ch`` to the subsystems ``acting_on`` of ``rho``, identity elsewhere.

    The untouched subsystems keep their order and the channel outputs are
    appended after them.

    Raises:
        LabelError: if ``acting_on`` does not match the channel's input labels
    """
    in_labels = ch.in_shape.labels
    if acting_on is not None and set(acting_on) != set(in_labels):
        raise LabelError(
            f"acting_on {sorted(acting_on)} does not match channel inputs "
            f"{list(in_labels)}"
        )
    rho.shape.check_labels(in_labels)
    for label in in_labels:
        if rho.shape.dim_of([label]) != ch.in_shape.dim_of([label]):
            raise LabelError(f"dimension mismatch on {label!r}")
    rest = rho.shape.without(in_labels)
    out_shape = rest.concat(ch.out_shape)
    check_dimension(out_shape.dim)

    permuted = rho.permute(rest.labels + in_labels).matrix
    dr, di = rest.dim, ch.in_shape.dim
    ops = ch.stacked
    out = np.einsum(
        "kxi,aibj,kyj->axby",
        ops,
        permuted.reshape(dr, di, dr, di),
        ops.conj(),
        optimize=True,
    )
    d = out_shape.dim
    return DensityOperator(out.reshape(d, d), out_shape, check=False)


def apply_isometry(
    v: np.ndarray, psi: PureState, in_shape: SubsystemShape, out_shape: SubsystemShape
) -> PureState:
    """Apply an isometry to the ``in_shape`` factors of a pure state."""
    psi.shape.check_labels(in_shape.labels)
    rest = psi.shape.without(in_shape.labels)
    new_shape = rest.concat(out_shape)
    check_dimension(new_shape.dim)
    amps = permute_vector(psi.amplitudes, psi.shape, rest.labels + in_shape.labels)
    out = amps.reshape(rest.dim, in_shape.dim) @ v.T
    return PureState(out.reshape(-1), new_shape)


def apply_dilation(dil: IsometricDilation, rho: DensityOperator) -> DensityOperator:
    """U rho U^dag on the dilation's input labels."""
    channel = isometry_channel(dil.isometry, dil.in_shape, dil.out_shape)
    return apply_channel(channel, rho)


# ---------------------------------------------------------------------------
# Channel constructors and combinators
# ---------------------------------------------------------------------------


def isometry_channel(
    v: np.ndarray, in_shape: SubsystemShape, out_shape: SubsystemShape
) -> KrausChannel:
    return KrausChannel((v,), in_shape, out_shape)


def identity_channel(
    shape: SubsystemShape, out_labels: Optional[Sequence[str]] = None
) -> KrausChannel:
    """Identity map, optionally renaming the subsystems on the way out."""
    if out_labels is None:
        out_shape = shape
    else:
        out_shape = SubsystemShape(tuple(out_labels), shape.dims)
    eye = np.eye(shape.dim, dtype=complex)
    return KrausChannel((eye,), shape, out_shape, check=False)


def trace_channel(shape: SubsystemShape) -> KrausChannel:
    """Discard ``shape`` entirely (output is the trivial 1-dim space)."""
    eye = np.eye(shape.dim, dtype=complex)
    ops = tuple(eye[i : i + 1, :] for i in range(shape.dim))
    return KrausChannel(ops, shape, SubsystemShape.empty(), check=False)


def depolarizing_channel(
    p: float, dim: int = 2, in_label: str = A, out_label: Optional[str] = None
) -> KrausChannel:
    """rho -> (1 - p) rho + p I/d; fully depolarizing at p = 1."""
    ops: List[np.ndarray] = []
    if p < 1:
        ops.append(np.sqrt(1 - p) * np.eye(dim, dtype=complex))
    if p > 0:
        for i in range(dim):
            for j in range(dim):
                op = np.zeros((dim, dim), dtype=complex)
                op[i, j] = np.sqrt(p / dim)
                ops.append(op)
    return KrausChannel(
        tuple(ops),
        SubsystemShape.of((in_label, dim)),
        SubsystemShape.of((out_label or in_label, dim)),
    )


def _permutation_matrix(shape: SubsystemShape, order: Sequence[str]) -> np.ndarray:
    """P with P v == permute_vector(v, shape, order)."""
    eye = np.eye(shape.dim, dtype=complex)
    columns = [permute_vector(eye[:, i], shape, order) for i in range(shape.dim)]
    return np.stack(columns, axis=1)


def compose(second: KrausChannel, first: KrausChannel) -> KrausChannel:
    """second o first; ``second`` must consume exactly the outputs of ``first``."""
    if set(second.in_shape.labels) != set(first.out_shape.labels):
        raise LabelError(
            f"cannot compose: {list(first.out_shape.labels)} -> "
            f"{list(second.in_shape.labels)}"
        )
    perm = _permutation_matrix(first.out_shape, second.in_shape.labels)
    ops = tuple(k2 @ perm @ k1 for k2 in second.kraus_ops for k1 in first.kraus_ops)
    return KrausChannel(ops, first.in_shape, second.out_shape, check=False)


def tensor_channels(first: KrausChannel, second: KrausChannel) -> KrausChannel:
    in_shape = first.in_shape.concat(second.in_shape)
    out_shape = first.out_shape.concat(second.out_shape)
    check_dimension(max(in_shape.dim, out_shape.dim))
    ops = tuple(np.kron(a, b) for a in first.kraus_ops for b in second.kraus_ops)
    return KrausChannel(ops, in_shape, out_shape, check=False)


def channel_power(ch: KrausChannel, n: int) -> KrausChannel:
    """n parallel copies with labels suffixed ``.1`` ... ``.n``."""
    result = None
    for i in range(1, n + 1):
        copy = ch.relabel(
            {lab: f"{lab}.{i}" for lab in ch.in_shape.labels},
            {lab: f"{lab}.{i}" for lab in ch.out_shape.labels},
        )
        result = copy if result is None else tensor_channels(result, copy)
    return result


def lift_channel(ch: KrausChannel, t_shape: SubsystemShape) -> KrausChannel:
    """The lifted channel N(Tr_T(.)) taking the purifying system T as extra input."""
    return tensor_channels(trace_channel(t_shape), ch)


def choi_matrix(ch: KrausChannel) -> np.ndarray:
    """Unnormalised Choi matrix sum_ij |i><j| (x) N(|i><j|) over (input, output)."""
    vecs = [op.T.reshape(-1) for op in ch.kraus_ops]
    return sum(np.outer(v, v.conj()) for v in vecs)


# ---------------------------------------------------------------------------
# Dilations
# ---------------------------------------------------------------------------


def stinespring(ch: KrausChannel, env_label: str = K) -> IsometricDilation:
    """
    U = sum_j N_j (x) |j>_K.

    The environment dimension equals the number of Kraus operators supplied.
    """
    ops = ch.stacked
    rank, d_out, d_in = ops.shape
    u = ops.transpose(1, 0, 2).reshape(d_out * rank, d_in)
    out_shape = ch.out_shape.concat(SubsystemShape.of((env_label, rank)))
    return IsometricDilation(u, ch.in_shape, out_shape, (env_label,))


def _split_dilation(
    dil: IsometricDilation,
) -> Tuple[np.ndarray, SubsystemShape, SubsystemShape]:
    main = dil.out_shape.without(dil.env_labels)
    env = dil.out_shape.subset(dil.env_labels)
    perm = _permutation_matrix(dil.out_shape, main.labels + env.labels)
    u3 = (perm @ dil.isometry).reshape(main.dim, env.dim, dil.in_shape.dim)
    return u3, main, env


def dilation_channel(dil: IsometricDilation) -> KrausChannel:
    """rho -> Tr_env(U rho U^dag)."""
    u3, main, _ = _split_dilation(dil)
    ops = tuple(u3[:, e, :] for e in range(u3.shape[1]))
    return KrausChannel(ops, dil.in_shape, main, check=False)


def complementary(dil: IsometricDilation) -> KrausChannel:
    """rho -> Tr_B(U rho U^dag), the map to the environment."""
    u3, _, env = _split_dilation(dil)
    ops = tuple(u3[b, :, :] for b in range(u3.shape[0]))
    return KrausChannel(ops, dil.in_shape, env, check=False)


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------


def maximally_entangled(dim: int, labels: Tuple[str, str] = (A, B)) -> PureState:
    """(1/sqrt D) sum_j |j>|j>."""
    if dim < 1:
        raise DomainError("dim", dim, 1, get_settings().DIM_CAP)
    v = np.eye(dim, dtype=complex).reshape(-1) / np.sqrt(dim)
    return PureState(v, SubsystemShape.of((labels[0], dim), (labels[1], dim)))


def maximally_correlated(
    q: Sequence[float], labels: Tuple[str, str, str] = (E, E0, C)
) -> ChannelStateTriple:
    """
    sum_s q(s) |s><s|_E (x) |s><s|_E0 (x) |s><s|_C.

    Raises:
        ProbabilityError: if q is not a probability vector within 1e-12
    """
    is_valid, message = validate_probability_vector(q)
    if not is_valid:
        raise ProbabilityError(message)
    d = len(q)
    m = np.zeros((d**3, d**3), dtype=complex)
    for s, weight in enumerate(q):
        idx = s * d * d + s * d + s
        m[idx, idx] = weight
    shape = SubsystemShape.of((labels[0], d), (labels[1], d), (labels[2], d))
    return ChannelStateTriple(
        DensityOperator(m, shape, check=False),
        e_labels=(labels[0],),
        e0_labels=(labels[1],),
        c_labels=(labels[2],),
    )


def trivial_triple() -> ChannelStateTriple:
    """The state-free model: E, E0 and C are all one-dimensional."""
    return maximally_correlated((1.0,))


def purification(rho: DensityOperator, t_label: str = T) -> PureState:
    """
    Purification with the purifying system T placed first.

    Diagonal inputs use the standard purification sum_i sqrt(p_i) |i>_T |i>;
    otherwise the eigenbasis of rho is used. T has dimension rank(rho).
    """
    m = rho.matrix
    clip = get_settings().ENTROPY_CLIP
    off_diagonal = m - np.diag(np.diag(m))
    if not np.any(np.abs(off_diagonal) > 1e-15):
        weights = np.clip(np.diag(m).real, 0.0, None)
        support = [i for i, w in enumerate(weights) if w > clip]
        vectors = np.eye(rho.dim, dtype=complex)[:, support]
        weights = weights[support]
    else:
        evals, evecs = clipped_spectrum(m)
        support = [i for i, w in enumerate(evals) if w > clip]
        vectors, weights = evecs[:, support], evals[support]
    rank = len(support)
    amps = np.zeros((rank, rho.dim), dtype=complex)
    for i in range(rank):
        amps[i] = np.sqrt(weights[i]) * vectors[:, i]
    amps = amps.reshape(-1)
    shape = SubsystemShape.of((t_label, rank)).concat(rho.shape)
    return PureState.normalized(amps, shape)


def state_vector(rho: DensityOperator) -> PureState:
    """Vector of a rank-one density operator, largest entry made real."""
    evals, evecs = clipped_spectrum(rho.matrix)
    if evals[0] < 1.0 - 1e-9:
        raise PurityError(f"state has purity eigenvalue {evals[0]:.12g}")
    v = evecs[:, 0]
    pivot = v[np.argmax(np.abs(v))]
    return PureState.normalized(v * (abs(pivot) / pivot), rho.shape)


def purify_channel_state(
    triple: ChannelStateTriple,
) -> Tuple[ChannelStateTriple, PureState]:
    """
    Purification of the channel-state system.

    Returns the purified triple over (T, E, E0, C) and its state vector. An
    already-pure triple gets a trivial one-dimensional T.
    """
    if triple.t_labels:
        if not triple.is_pure:
            raise LabelError(
                "triple already carries T but is not pure", triple.t_labels
            )
        return triple, state_vector(triple.state)
    t_label = T
    while t_label in triple.state.labels:
        t_label += "'"
    psi = purification(triple.state, t_label)
    purified = ChannelStateTriple(
        psi.density(),
        e_labels=triple.e_labels,
        e0_labels=triple.e0_labels,
        c_labels=triple.c_labels,
        t_labels=(t_label,),
    )
    logger.debug("Purified channel state with T dimension %d", psi.shape.dims[0])
    return purified, psi


def state_power(rho: DensityOperator, n: int) -> DensityOperator:
    """n-fold tensor power with labels suffixed ``.1`` ... ``.n``."""
    result = None
    for i in range(1, n + 1):
        copy = rho.relabel({lab: f"{lab}.{i}" for lab in rho.labels})
        result = copy if result is None else result.tensor(copy)
    check_dimension(result.dim)
    return result


def random_state(
    shape: SubsystemShape, seed: SeedLike = None, rank: Optional[int] = None
) -> DensityOperator:
    matrix = random_density_matrix(shape.dim, seed, rank)
    return DensityOperator(matrix, shape, check=False)


def haar_pure_state(shape: SubsystemShape, seed: SeedLike = None) -> PureState:
    return PureState(haar_vector(shape.dim, make_rng(seed)), shape)


def povm_measure(rho: DensityOperator, povm: Sequence[np.ndarray]) -> np.ndarray:
    """
    Born-rule probabilities p(j) = Tr(Lambda_j rho).

    Raises:
        PositivityError: if an element is not positive semidefinite
        CompletenessError: if the elements do not sum to the identity
    """
    settings = get_settings()
    elements = [np.asarray(e, dtype=complex) for e in povm]
    for e in elements:
        evals = np.linalg.eigvalsh((e + e.conj().T) / 2)
        is_valid, _ = validate_positive(evals, settings.POSITIVITY_TOL)
        if not is_valid:
            raise PositivityError(float(evals.min()), settings.POSITIVITY_TOL)
    is_valid, residual = validate_completeness(elements, rho.dim, settings.TRACE_TOL)
    if not is_valid:
        raise CompletenessError(residual, what="POVM")
    probs = np.array([np.trace(e @ rho.matrix).real for e in elements])
    return np.clip(probs, 0.0, None)


def basis_povm(dim: int) -> List[np.ndarray]:
    """Computational-basis projectors."""
    eye = np.eye(dim, dtype=complex)
    return [np.outer(eye[i], eye[i]) for i in range(dim)]
