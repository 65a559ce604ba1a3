"""
Exact evaluation of explicit masking codes at small blocklength.

Includes:
- ``CodeSpec`` (encoder, decoder and optional shared entanglement)
- ``evaluate_code``: worst error and leakage over a tested message set
- Reference protocols: trivial code, superdense coding (plain and with the
  state-dependent pre-flip) and teleportation

The error is a maximum over the tested messages, not over all message
states, and reports say so.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from qmask.core.config import get_settings
from qmask.core.linalg import (
    SeedLike,
    SubsystemShape,
    check_dimension,
    clipped_spectrum,
    fidelity_distance,
    haar_vector,
    make_rng,
    pure_fidelity_distance,
    trace_norm,
)
from qmask.exceptions import LabelError, SpecError
from qmask.models.quantum import (
    A_PRIME,
    B,
    G_A,
    G_B,
    J,
    M,
    M_HAT,
    ChannelStateTriple,
    DensityOperator,
    KrausChannel,
    PureState,
)
from qmask.models.schemas.reports import CodeReport, MessageDiagnostic
from qmask.services.entropy_service import conditional_mutual_information, entropy_of
from qmask.services.quantum_service import (
    apply_channel,
    channel_power,
    identity_channel,
    maximally_entangled,
    state_power,
)
from qmask.services.region_service import MaskingInstance
from qmask.services.zoo_service import stateless
from qmask.utils.parallel import ordered_map

logger = logging.getLogger(__name__)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.diag([1.0, -1.0]).astype(complex)


def pauli(m: int) -> np.ndarray:
    """X^{m1} Z^{m2} for m = 2 m1 + m2."""
    m1, m2 = divmod(m, 2)
    return np.linalg.matrix_power(PAULI_X, m1) @ np.linalg.matrix_power(PAULI_Z, m2)


def bell_state(m: int, labels: Tuple[str, str] = (B, G_B)) -> PureState:
    """(X^{m1} Z^{m2} (x) I) Phi for m in 0..3."""
    phi = maximally_entangled(2, labels)
    amps = np.kron(pauli(m), np.eye(2)) @ phi.amplitudes
    return PureState(amps, phi.shape)


def _basis_bra(dim: int, index: int) -> np.ndarray:
    bra = np.zeros((1, dim), dtype=complex)
    bra[0, index] = 1.0
    return bra


def constant_channel(in_shape: SubsystemShape, sigma: DensityOperator) -> KrausChannel:
    """rho -> Tr(rho) sigma, Kraus sqrt(lambda_k) |v_k><i|."""
    evals, evecs = clipped_spectrum(sigma.matrix)
    ops = []
    for k, lam in enumerate(evals):
        if lam <= 0:
            continue
        for i in range(in_shape.dim):
            bra = _basis_bra(in_shape.dim, i)
            ops.append(math.sqrt(lam) * np.outer(evecs[:, k], bra))
    return KrausChannel(tuple(ops), in_shape, sigma.shape)


# ---------------------------------------------------------------------------
# Codes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CodeSpec:
    """
    A masking code of blocklength n.

    The encoder maps (M, G_A, E0^n) to A'^n (G_A only when entanglement is
    shared), the decoder maps (B^n, G_B) to M^. Rates follow from the
    dimensions: Q = log2|M| / n and R_e = log2|G_A| / n.
    """

    n: int
    encoder: KrausChannel
    decoder: KrausChannel
    entangled_state: Optional[PureState] = None
    message_label: str = M
    output_label: str = M_HAT

    def __post_init__(self):
        if self.n < 1:
            raise SpecError(f"blocklength must be >= 1, got {self.n}")
        if self.message_label not in self.encoder.in_shape:
            raise LabelError(
                "encoder does not read the message", self.encoder.in_shape.labels
            )
        if self.output_label not in self.decoder.out_shape:
            raise LabelError("decoder does not write M^", self.decoder.out_shape.labels)
        if self.message_dim != self.decoder.out_shape.dim_of([self.output_label]):
            raise SpecError("M and M^ differ in dimension")
        if self.entangled_state is not None:
            labels = set(self.entangled_state.labels)
            if labels != {G_A, G_B}:
                raise LabelError(
                    "entangled state must live on (G_A, G_B)", tuple(labels)
                )

    @property
    def message_dim(self) -> int:
        return self.encoder.in_shape.dim_of([self.message_label])

    @property
    def rate(self) -> float:
        return math.log2(self.message_dim) / self.n

    @property
    def entanglement_rate(self) -> float:
        if self.entangled_state is None:
            return 0.0
        return math.log2(self.entangled_state.shape.dim_of([G_A])) / self.n


def _block(
    instance: MaskingInstance, n: int
) -> Tuple[KrausChannel, ChannelStateTriple]:
    """N^{(x)n} and phi^{(x)n}; n = 1 keeps the plain labels."""
    if n == 1:
        return instance.channel, instance.triple
    t = instance.triple

    def suffixed(labels):
        return tuple(f"{lab}.{i}" for i in range(1, n + 1) for lab in labels)

    triple = ChannelStateTriple(
        state_power(t.state, n),
        e_labels=suffixed(t.e_labels),
        e0_labels=suffixed(t.e0_labels),
        c_labels=suffixed(t.c_labels),
    )
    return channel_power(instance.channel, n), triple


def default_messages(
    dim: int, seed: SeedLike = 0, label: str = M
) -> List[Tuple[str, DensityOperator]]:
    """Basis states, four Haar-random pure states and the maximally mixed state."""
    shape = SubsystemShape.of((label, dim))
    rng = make_rng(seed)
    messages = basis_messages(dim, label)
    for i in range(4):
        v = haar_vector(dim, rng)
        messages.append((f"haar {i}", PureState(v, shape).density()))
    messages.append(("maximally mixed", DensityOperator.maximally_mixed(shape)))
    return messages


def basis_messages(dim: int, label: str = M) -> List[Tuple[str, DensityOperator]]:
    shape = SubsystemShape.of((label, dim))
    return [(f"basis {i}", DensityOperator.basis_state(shape, i)) for i in range(dim)]


MessageSet = Sequence[Union[DensityOperator, Tuple[str, DensityOperator]]]


def evaluate_code(
    instance: MaskingInstance,
    code: CodeSpec,
    message_states: Optional[MessageSet] = None,
    seed: SeedLike = 0,
) -> CodeReport:
    """
    Error and leakage of ``code`` over ``instance`` for each tested message.

    For a message rho_M the joint state F(phi^n (x) rho_M (x) Psi) is pushed
    through N^n; the error is 1/2 ||rho_M - D(rho_{B^n G_B})||_1 and the
    leakage (1/n) I(C^n; B^n G_B). The report takes the maximum of both.

    Raises:
        DimensionLimitError: if the joint space exceeds CODE_DIM_CAP
        LabelError: if the code's labels do not fit the instance
    """
    channel, triple = _block(instance, code.n)
    messages = message_states
    if messages is None:
        messages = default_messages(code.message_dim, seed, code.message_label)
    messages = [
        m if isinstance(m, tuple) else (f"message {i}", m)
        for i, m in enumerate(messages)
    ]

    joint_dim = triple.state.dim * code.message_dim
    if code.entangled_state is not None:
        joint_dim *= code.entangled_state.shape.dim
    check_dimension(joint_dim, get_settings().CODE_DIM_CAP, what="code state")

    g_b = [G_B] if code.entangled_state is not None else []
    b_labels = list(channel.out_shape.labels)
    c_labels = list(triple.c_labels)
    h_c = entropy_of(triple.state, c_labels) / code.n

    def run(item: Tuple[str, DensityOperator]) -> MessageDiagnostic:
        name, rho_m = item
        state = triple.state.tensor(rho_m)
        if code.entangled_state is not None:
            state = state.tensor(code.entangled_state.density())
        encoded = apply_channel(code.encoder, state)
        received = apply_channel(channel, encoded)
        leakage = conditional_mutual_information(received, c_labels, b_labels + g_b)
        leakage /= code.n
        decoded = apply_channel(code.decoder, received).reduce([code.output_label])
        error = 0.5 * trace_norm(rho_m.matrix - decoded.matrix)
        return MessageDiagnostic(
            label=name, error=min(1.0, error), leakage=max(0.0, leakage)
        )

    diagnostics = ordered_map(run, messages)
    report = CodeReport(
        n=code.n,
        error=max(d.error for d in diagnostics),
        leakage=max(d.leakage for d in diagnostics),
        leakage_ceiling=2 * h_c,
        messages=diagnostics,
        extras={"rate": code.rate, "entanglement_rate": code.entanglement_rate},
    )
    logger.info(
        "Code n=%d: error %.3e, leakage %.3e over %d messages",
        code.n,
        report.error,
        report.leakage,
        len(diagnostics),
    )
    return report


# ---------------------------------------------------------------------------
# Reference codes
# ---------------------------------------------------------------------------


def trivial_code(instance: MaskingInstance) -> CodeSpec:
    """Send the message as is: M -> A' ignoring E0, decode B -> M^ by identity."""
    t = instance.triple
    a_prime = instance.a_prime
    d_e0 = t.e0_dim
    e0_shape = t.state.shape.subset(t.e0_labels)
    in_shape = SubsystemShape.of((M, a_prime.dim)).concat(e0_shape)
    ops = tuple(
        np.kron(np.eye(a_prime.dim), _basis_bra(d_e0, e)) for e in range(d_e0)
    )
    encoder = KrausChannel(ops, in_shape, a_prime)
    out = instance.channel.out_shape
    if out.dim != a_prime.dim:
        raise SpecError("the trivial code needs |B| = |A'|")
    decoder = KrausChannel(
        (np.eye(out.dim, dtype=complex),),
        out,
        SubsystemShape.of((M_HAT, out.dim)),
        check=False,
    )
    return CodeSpec(1, encoder, decoder)


def _superdense_encoder(d_e0: int, preflip: bool) -> KrausChannel:
    """(<m|_M (x) <e|_E0) (x) Z^{e} X^{m1} Z^{m2} from G_A to A'."""
    ops = []
    for m in range(4):
        for e in range(d_e0):
            flip = np.linalg.matrix_power(PAULI_Z, e % 2) if preflip else np.eye(2)
            payload = flip @ pauli(m)
            op = np.kron(np.kron(_basis_bra(4, m), payload), _basis_bra(d_e0, e))
            ops.append(op)
    in_shape = SubsystemShape.of((M, 4), (G_A, 2), ("E0", d_e0))
    return KrausChannel(tuple(ops), in_shape, SubsystemShape.of((A_PRIME, 2)))


def bell_decoder() -> KrausChannel:
    """|m><beta_m| from (B, G_B) to M^."""
    ops = []
    for m in range(4):
        ket = np.zeros((4, 1), dtype=complex)
        ket[m, 0] = 1.0
        ops.append(ket @ bell_state(m).amplitudes.conj()[None, :])
    return KrausChannel(
        tuple(ops), SubsystemShape.of((B, 2), (G_B, 2)), SubsystemShape.of((M_HAT, 4))
    )


def superdense_code(d_e0: int = 1) -> CodeSpec:
    """Two bits over one qubit use and one ebit."""
    return CodeSpec(
        1,
        _superdense_encoder(d_e0, False),
        bell_decoder(),
        maximally_entangled(2, (G_A, G_B)),
    )


def preflip_superdense_code() -> CodeSpec:
    """
    Superdense coding for the controlled-Z channel: the encoder applies Z on
    G_A whenever E0 reads 1, which cancels the channel's flip.
    """
    return CodeSpec(
        1,
        _superdense_encoder(2, True),
        bell_decoder(),
        maximally_entangled(2, (G_A, G_B)),
    )


def constant_decoder(
    code: CodeSpec, state: Optional[DensityOperator] = None
) -> CodeSpec:
    """The same code with its decoder replaced by a constant map (|0><0| by default)."""
    out_shape = code.decoder.out_shape
    if state is None:
        state = DensityOperator.basis_state(out_shape, 0)
    decoder = constant_channel(code.decoder.in_shape, state)
    return CodeSpec(
        code.n, code.encoder, decoder, code.entangled_state, code.message_label
    )


def superdense(
    message_bits: Tuple[int, int], channel: Optional[KrausChannel] = None
) -> CodeReport:
    """
    Superdense coding of two bits over a qubit channel (noiseless by default).

    Returns the report for the single basis message m = 2 m1 + m2.
    """
    m1, m2 = message_bits
    if m1 not in (0, 1) or m2 not in (0, 1):
        raise SpecError(f"message bits must be 0 or 1, got {message_bits}")
    if channel is None:
        channel = identity_channel(SubsystemShape.of((A_PRIME, 2)), [B])
    base, triple = stateless(channel)
    instance = MaskingInstance(base, triple)
    m = 2 * m1 + m2
    message = DensityOperator.basis_state(SubsystemShape.of((M, 4)), m)
    report = evaluate_code(instance, superdense_code(), [(f"bits {m1}{m2}", message)])
    report.extras["bits_per_use"] = 2.0
    return report


def _teleport_measurement() -> KrausChannel:
    """Bell measurement on (M, G_A) recording the outcome in J."""
    ops = []
    for j in range(4):
        ket = np.zeros((4, 1), dtype=complex)
        ket[j, 0] = 1.0
        ops.append(ket @ bell_state(j, (M, G_A)).amplitudes.conj()[None, :])
    return KrausChannel(
        tuple(ops), SubsystemShape.of((M, 2), (G_A, 2)), SubsystemShape.of((J, 4))
    )


def _teleport_correction() -> KrausChannel:
    """Apply X^{j1} Z^{j2} to G_B given j, output on M^."""
    ops = tuple(np.kron(_basis_bra(4, j), pauli(j)) for j in range(4))
    return KrausChannel(
        ops, SubsystemShape.of((J, 4), (G_B, 2)), SubsystemShape.of((M_HAT, 2))
    )


def teleportation(message_state: Union[PureState, DensityOperator]) -> CodeReport:
    """
    Teleport a qubit with one ebit and two classical bits.

    The error is the trace distance between input and output; the fidelity
    distance goes into ``extras``, computed from the overlap with the input
    vector when the message is pure.
    """
    psi: Optional[np.ndarray] = None
    if isinstance(message_state, PureState):
        psi = message_state.amplitudes
        rho = message_state.density()
    else:
        rho = message_state
    if rho.dim != 2:
        raise SpecError("teleportation takes a single qubit")
    rho = DensityOperator(rho.matrix, SubsystemShape.of((M, 2)), check=False)
    state = rho.tensor(maximally_entangled(2, (G_A, G_B)).density())
    measured = apply_channel(_teleport_measurement(), state)
    out = apply_channel(_teleport_correction(), measured)
    error = 0.5 * trace_norm(rho.matrix - out.matrix)
    if psi is None:
        distance = fidelity_distance(rho.matrix, out.matrix)
    else:
        distance = pure_fidelity_distance(psi, out.matrix)
    return CodeReport(
        n=1,
        error=min(1.0, error),
        leakage=0.0,
        leakage_ceiling=0.0,
        label="single message",
        messages=[MessageDiagnostic(label="message", error=error, leakage=0.0)],
        extras={
            "fidelity_distance": distance,
            "classical_bits": 2.0,
            "ebits": 1.0,
        },
    )
