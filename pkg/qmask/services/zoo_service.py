"""
Channel zoo and structural class checks.

Includes:
- The state-dependent dephasing pair and the erasure channel
- Hadamard channels built from (zeta, psi, eta) data, their degraders and
  the measure-and-retain map L
- Sampled less-noisy, degradability and Hadamard-factorisation checks

Class checks are samplers: they can exhibit violations but never certify
membership, and their reports say "no violation found in N trials".
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from qmask.core.linalg import (
    SeedLike,
    SubsystemShape,
    haar_unitary,
    haar_vector,
    make_rng,
    random_density_matrix,
    trace_norm,
)
from qmask.exceptions import ConfigurationError, LabelError, SpecError
from qmask.models.quantum import (
    A,
    A_PRIME,
    B,
    C1,
    E,
    K,
    ChannelStateTriple,
    DensityOperator,
    IsometricDilation,
    KrausChannel,
    PureState,
)
from qmask.models.schemas.reports import ClassCheckReport
from qmask.services.entropy_service import conditional_entropy
from qmask.services.quantum_service import (
    apply_channel,
    apply_dilation,
    apply_isometry,
    complementary,
    dilation_channel,
    maximally_correlated,
    purification,
    trivial_triple,
)
from qmask.utils.parallel import ordered_map, spawn_seeds
from qmask.utils.validators import isometry_residual

logger = logging.getLogger(__name__)

PAULI_Z = np.diag([1.0, -1.0]).astype(complex)
LESS_NOISY_CAVEAT = (
    "checked under the canonical Stinespring dilation only; a violation there "
    "does not rule out another isometric extension"
)
MARGIN_TOL = 1e-8


# ---------------------------------------------------------------------------
# Dephasing and erasure
# ---------------------------------------------------------------------------


class DephasingSpec(BaseModel):
    """A pair of qubit phase-flip channels selected by a biased bit s."""

    model_config = ConfigDict(extra="forbid")

    q: float = Field(..., ge=0.0, le=0.5, description="probability that s = 1")
    eps0: float = Field(..., ge=0.0, le=1.0)
    eps1: float = Field(..., ge=0.0, le=1.0)

    @property
    def eps_bar(self) -> float:
        """Average flip probability seen without state information."""
        return (1 - self.q) * self.eps0 + self.q * self.eps1

    @property
    def eps_hat(self) -> float:
        """Average flip probability after the encoder pre-flips on s = 1."""
        return (1 - self.q) * self.eps0 + self.q * (1 - self.eps1)

    @property
    def in_regime(self) -> bool:
        return self.eps0 <= 0.5 <= self.eps1


def _phase_flip_ops(eps: float) -> List[np.ndarray]:
    ops = []
    if eps < 1:
        ops.append(np.sqrt(1 - eps) * np.eye(2, dtype=complex))
    if eps > 0:
        ops.append(np.sqrt(eps) * PAULI_Z)
    return ops


def phase_flip_channel(
    eps: float, in_label: str = A_PRIME, out_label: str = B
) -> KrausChannel:
    """rho -> (1 - eps) rho + eps Z rho Z."""
    if not 0.0 <= eps <= 1.0:
        raise ConfigurationError(f"phase-flip probability {eps} outside [0, 1]")
    return KrausChannel(
        tuple(_phase_flip_ops(eps)),
        SubsystemShape.of((in_label, 2)),
        SubsystemShape.of((out_label, 2)),
    )


def dephasing_channel(spec: DephasingSpec) -> Tuple[KrausChannel, ChannelStateTriple]:
    """
    Block channel over (E, A') -> B acting as the phase flip with eps_s on |s>_E.

    Kraus operators are <s|_E (x) K_k^(s); the channel state is maximally
    correlated with weights (1 - q, q).
    """
    ops = []
    for s, eps in enumerate((spec.eps0, spec.eps1)):
        bra = np.eye(2, dtype=complex)[s : s + 1, :]
        ops.extend(np.kron(bra, op) for op in _phase_flip_ops(eps))
    channel = KrausChannel(
        tuple(ops),
        SubsystemShape.of((E, 2), (A_PRIME, 2)),
        SubsystemShape.of((B, 2)),
    )
    return channel, maximally_correlated((1 - spec.q, spec.q))


def average_dephasing(spec: DephasingSpec) -> KrausChannel:
    """The channel seen when E is traced out: a phase flip with eps_bar."""
    return phase_flip_channel(spec.eps_bar)


def erasure_channel(
    eps: float, in_label: str = A_PRIME, out_label: str = B
) -> KrausChannel:
    """Qubit erasure into a 3-dim output whose last basis vector is the flag |e>."""
    if not 0.0 <= eps <= 1.0:
        raise ConfigurationError(f"erasure probability {eps} outside [0, 1]")
    ops = []
    if eps < 1:
        keep = np.zeros((3, 2), dtype=complex)
        keep[0, 0] = keep[1, 1] = np.sqrt(1 - eps)
        ops.append(keep)
    if eps > 0:
        for i in range(2):
            flag = np.zeros((3, 2), dtype=complex)
            flag[2, i] = np.sqrt(eps)
            ops.append(flag)
    return KrausChannel(
        tuple(ops),
        SubsystemShape.of((in_label, 2)),
        SubsystemShape.of((out_label, 3)),
    )


def stateless(ch: KrausChannel) -> Tuple[KrausChannel, ChannelStateTriple]:
    """Embed a channel without state: a 1-dim E paired with the trivial triple."""
    in_shape = SubsystemShape.of((E, 1)).concat(ch.in_shape)
    embedded = KrausChannel(ch.kraus_ops, in_shape, ch.out_shape, check=False)
    return embedded, trivial_triple()


# ---------------------------------------------------------------------------
# Hadamard channels
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HadamardSpec:
    """
    Data of the isometry V = sum_x |psi^x>_B (x) |eta^x>_{C1 K} <zeta^x|_{E A'}.

    ``psi_basis`` holds the basis of B in its columns. The zeta states must
    resolve the identity and the psi basis must be orthonormal, both within
    1e-9; as a consequence |X| = dim B = dim EA'.
    """

    zeta_states: Tuple[PureState, ...]
    eta_states: Tuple[PureState, ...]
    psi_basis: np.ndarray
    b_label: str = B

    def __post_init__(self):
        object.__setattr__(self, "zeta_states", tuple(self.zeta_states))
        object.__setattr__(self, "eta_states", tuple(self.eta_states))
        basis = np.asarray(self.psi_basis, dtype=complex)
        object.__setattr__(self, "psi_basis", basis)
        count = len(self.zeta_states)
        if count == 0 or len(self.eta_states) != count or basis.shape != (count, count):
            raise SpecError(
                f"need matching zeta, eta and psi counts, got {count}, "
                f"{len(self.eta_states)} and psi {basis.shape}"
            )
        if len({z.shape for z in self.zeta_states}) != 1:
            raise SpecError("zeta states live on different spaces")
        if len({h.shape for h in self.eta_states}) != 1:
            raise SpecError("eta states live on different spaces")
        zeta = np.stack([z.amplitudes for z in self.zeta_states], axis=1)
        resolution = float(np.max(np.abs(zeta @ zeta.conj().T - np.eye(zeta.shape[0]))))
        if zeta.shape[0] != count or resolution > 1e-9:
            raise SpecError("zeta states do not resolve the identity", resolution)
        orthonormality = isometry_residual(basis)
        if orthonormality > 1e-9:
            raise SpecError("psi basis is not orthonormal", orthonormality)

    @property
    def in_shape(self) -> SubsystemShape:
        return self.zeta_states[0].shape

    @property
    def env_shape(self) -> SubsystemShape:
        return self.eta_states[0].shape

    @property
    def b_shape(self) -> SubsystemShape:
        return SubsystemShape.of((self.b_label, self.psi_basis.shape[0]))

    def isometry(self) -> np.ndarray:
        rows = self.b_shape.dim * self.env_shape.dim
        v = np.zeros((rows, self.in_shape.dim), dtype=complex)
        for x, (zeta, eta) in enumerate(zip(self.zeta_states, self.eta_states)):
            out = np.kron(self.psi_basis[:, x], eta.amplitudes)
            v += np.outer(out, zeta.amplitudes.conj())
        return v


def hadamard_channel(spec: HadamardSpec) -> Tuple[KrausChannel, IsometricDilation]:
    """
    The channel Tr_{C1 K}(V . V^dag) and its dilation over (B, C1, K).

    Raises:
        SpecError: if V misses being an isometry by more than 1e-6
    """
    v = spec.isometry()
    residual = isometry_residual(v)
    if residual > 1e-6:
        raise SpecError("Hadamard data do not define an isometry", residual)
    out_shape = spec.b_shape.concat(spec.env_shape)
    dilation = IsometricDilation(v, spec.in_shape, out_shape, spec.env_shape.labels)
    return dilation_channel(dilation), dilation


def _hadamard_env(dim_c1: int, dim_k: int) -> SubsystemShape:
    return SubsystemShape.of((C1, dim_c1), (K, dim_k))


def random_hadamard_spec(
    dim_e: int = 1,
    dim_a_prime: int = 2,
    dim_c1: int = 1,
    dim_k: int = 2,
    seed: SeedLike = None,
) -> HadamardSpec:
    """zeta from a Haar unitary, psi a Haar basis, eta Haar states."""
    rng = make_rng(seed)
    in_shape = SubsystemShape.of((E, dim_e), (A_PRIME, dim_a_prime))
    env = _hadamard_env(dim_c1, dim_k)
    u = haar_unitary(in_shape.dim, rng)
    zeta = tuple(PureState(u[:, x], in_shape) for x in range(in_shape.dim))
    eta = tuple(PureState(haar_vector(env.dim, rng), env) for _ in range(in_shape.dim))
    return HadamardSpec(zeta, eta, haar_unitary(in_shape.dim, rng))


def dephasing_hadamard_spec(eps: float) -> HadamardSpec:
    """
    The phase flip with probability ``eps`` in Hadamard form.

    zeta^a = psi^a = |a> on a 1-dim E and qubit A'; C1 is trivial and
    eta^a = sqrt(1 - eps)|0>_K + (-1)^a sqrt(eps)|1>_K.
    """
    if not 0.0 <= eps <= 1.0:
        raise ConfigurationError(f"phase-flip probability {eps} outside [0, 1]")
    in_shape = SubsystemShape.of((E, 1), (A_PRIME, 2))
    env = _hadamard_env(1, 2)
    eye = np.eye(2, dtype=complex)
    zeta = tuple(PureState(eye[a], in_shape) for a in range(2))
    eta = tuple(
        PureState(
            np.array([np.sqrt(1 - eps), (-1) ** a * np.sqrt(eps)], dtype=complex), env
        )
        for a in range(2)
    )
    return HadamardSpec(zeta, eta, eye)


def measure_prepare_degrader(spec: HadamardSpec) -> KrausChannel:
    """Measure B in the psi basis and prepare eta^x: Kraus |eta^x><psi^x|."""
    ops = tuple(
        np.outer(eta.amplitudes, spec.psi_basis[:, x].conj())
        for x, eta in enumerate(spec.eta_states)
    )
    return KrausChannel(ops, spec.b_shape, spec.env_shape)


def hadamard_l_channel(spec: HadamardSpec) -> KrausChannel:
    """L: B -> B C1 K with Kraus (|psi^x> (x) |eta^x>) <psi^x|."""
    ops = []
    for x, eta in enumerate(spec.eta_states):
        psi = spec.psi_basis[:, x]
        ops.append(np.outer(np.kron(psi, eta.amplitudes), psi.conj()))
    return KrausChannel(tuple(ops), spec.b_shape, spec.b_shape.concat(spec.env_shape))


# ---------------------------------------------------------------------------
# Input sampling
# ---------------------------------------------------------------------------


def sample_extensions(
    triple: ChannelStateTriple,
    a_prime: SubsystemShape,
    dim_a: int = 2,
    count: int = 1,
    seed: SeedLike = None,
) -> List[DensityOperator]:
    """
    Random rho over (A, E, A', C) whose (E, C) marginal is exactly phi_EC.

    Each sample purifies phi_EC into T, appends |0>_A |0>_A', applies a Haar
    unitary on (T, A, A') and traces T; one to three such states are mixed
    with Dirichlet weights. Nothing ever acts on E or C.
    """
    rng = make_rng(seed)
    ec_labels = list(triple.e_labels + triple.c_labels)
    phi_ec = triple.marginal(ec_labels)
    psi = purification(phi_ec, t_label="T~")
    ancilla_shape = SubsystemShape.of((A, dim_a)).concat(a_prime)
    ancilla = np.zeros(ancilla_shape.dim, dtype=complex)
    ancilla[0] = 1.0
    seeded = psi.tensor(PureState(ancilla, ancilla_shape))
    local = psi.shape.subset(["T~"]).concat(ancilla_shape)
    order = [A, *triple.e_labels, *a_prime.labels, *triple.c_labels]

    samples = []
    for _ in range(count):
        parts = int(rng.integers(1, 4))
        terms = []
        for w in rng.dirichlet(np.ones(parts)):
            u = haar_unitary(local.dim, rng)
            pure = apply_isometry(u, seeded, local, local)
            terms.append((w, pure.density().trace_out(["T~"]).permute(order)))
        matrix = sum(w * state.matrix for w, state in terms)
        samples.append(DensityOperator(matrix, terms[0][1].shape, check=False))
    return samples


def _a_prime_shape(
    dilation: IsometricDilation, triple: ChannelStateTriple
) -> SubsystemShape:
    in_shape = dilation.in_shape
    state_shape = triple.state.shape
    for label in triple.e_labels:
        if label not in in_shape or in_shape.dim_of([label]) != state_shape.dim_of(
            [label]
        ):
            raise LabelError(
                f"channel input does not carry state system {label!r}",
                in_shape.labels,
            )
    return in_shape.without(triple.e_labels)


def _statement(check: str, trials: int, violations: int) -> str:
    if violations == 0:
        return f"no violation found in {trials} trials"
    return f"{violations} {check} violations found in {trials} trials"


def _check_trials(trials: int) -> None:
    if trials < 1:
        raise ConfigurationError(f"trials must be >= 1, got {trials}")


# ---------------------------------------------------------------------------
# Class checks
# ---------------------------------------------------------------------------


def check_less_noisy(
    dilation: IsometricDilation,
    triple: ChannelStateTriple,
    trials: int = 100,
    seed: int = 0,
    dim_a: int = 2,
    swap: bool = False,
) -> ClassCheckReport:
    """
    Sample margins H(A|B) - H(A|K C) on extensions of phi_EC.

    K stands for every environment output of the dilation. With ``swap`` the
    roles of B and K are exchanged, H(A|K) - H(A|B C), which witnesses the
    reverse direction. Margins above 1e-8 count as violations.
    """
    _check_trials(trials)
    a_prime = _a_prime_shape(dilation, triple)
    b_labels = list(dilation.main_labels)
    k_labels = list(dilation.env_labels)
    c_labels = list(triple.c_labels)
    if swap:
        b_labels, k_labels = k_labels, b_labels

    def margin(child: np.random.SeedSequence) -> float:
        rho = sample_extensions(triple, a_prime, dim_a, 1, child)[0]
        out = apply_dilation(dilation, rho)
        return conditional_entropy(out, [A], b_labels) - conditional_entropy(
            out, [A], k_labels + c_labels
        )

    margins = ordered_map(margin, spawn_seeds(seed, trials))
    violations = sum(1 for m in margins if m > MARGIN_TOL)
    name = "reverse less-noisy" if swap else "less-noisy"
    logger.info("%s check: %d/%d violations", name, violations, trials)
    return ClassCheckReport(
        check=name,
        trials=trials,
        violations=violations,
        worst_margin=float(max(margins)),
        statement=_statement(name, trials, violations),
        caveat=LESS_NOISY_CAVEAT,
    )


def check_degradable(
    dilation: IsometricDilation,
    degrader: KrausChannel,
    triple: ChannelStateTriple,
    trials: int = 50,
    seed: int = 0,
    dim_a: int = 2,
) -> ClassCheckReport:
    """
    Worst ||N^c(rho) - D(N(rho))||_1 over sampled extensions, references A and C kept.

    Raises:
        LabelError: if the degrader does not map the channel output onto the
            environment labels of the dilation
    """
    _check_trials(trials)
    if set(degrader.in_shape.labels) != set(dilation.main_labels) or set(
        degrader.out_shape.labels
    ) != set(dilation.env_labels):
        raise LabelError(
            f"degrader must map {list(dilation.main_labels)} "
            f"to {list(dilation.env_labels)}",
            degrader.out_shape.labels,
        )
    a_prime = _a_prime_shape(dilation, triple)
    channel = dilation_channel(dilation)
    comp = complementary(dilation)

    def residual(child: np.random.SeedSequence) -> float:
        rho = sample_extensions(triple, a_prime, dim_a, 1, child)[0]
        target = apply_channel(comp, rho)
        simulated = apply_channel(degrader, apply_channel(channel, rho))
        simulated = simulated.permute(target.labels)
        return trace_norm(target.matrix - simulated.matrix)

    residuals = ordered_map(residual, spawn_seeds(seed, trials))
    worst = float(max(residuals))
    logger.info(
        "Degradability check: worst residual %.3e over %d trials", worst, trials
    )
    return ClassCheckReport(
        check="degradable",
        trials=trials,
        worst_residual=worst,
        statement=f"worst residual {worst:.3e} over {trials} trials",
    )


def _zeta_classical_input(
    spec: HadamardSpec, dim_a: int, rng: np.random.Generator
) -> DensityOperator:
    """sum_x p_x |zeta^x><zeta^x| (x) rho^x_A with random p and rho^x."""
    weights = rng.dirichlet(np.ones(len(spec.zeta_states)))
    m = None
    for w, zeta in zip(weights, spec.zeta_states):
        proj = np.outer(zeta.amplitudes, zeta.amplitudes.conj())
        term = w * np.kron(random_density_matrix(dim_a, rng), proj)
        m = term if m is None else m + term
    shape = SubsystemShape.of((A, dim_a)).concat(spec.in_shape)
    return DensityOperator(m, shape, check=False)


def hadamard_L_check(
    spec: HadamardSpec,
    trials: int = 50,
    seed: int = 0,
    dim_a: int = 2,
    coherent: bool = False,
    isometry: Optional[IsometricDilation] = None,
) -> ClassCheckReport:
    """
    Worst ||V rho V^dag - L(N(rho))||_1 over sampled inputs.

    Inputs are classical in the zeta basis unless ``coherent`` is set, in which
    case arbitrary states on (A, E, A') are drawn and the residual is
    informative only. ``isometry`` replaces V (and N with it) to run the check
    against a different dilation, e.g. a generic one as a negative control.
    """
    _check_trials(trials)
    if isometry is None:
        _, isometry = hadamard_channel(spec)
    expected = set(spec.b_shape.labels + spec.env_shape.labels)
    if set(isometry.out_shape.labels) != expected:
        raise LabelError(
            "isometry outputs do not match the Hadamard data",
            isometry.out_shape.labels,
        )
    n_channel = dilation_channel(isometry)
    l_channel = hadamard_l_channel(spec)
    in_shape = SubsystemShape.of((A, dim_a)).concat(isometry.in_shape)

    def residual(child: np.random.SeedSequence) -> float:
        rng = make_rng(child)
        if coherent:
            matrix = random_density_matrix(in_shape.dim, rng)
            rho = DensityOperator(matrix, in_shape, check=False)
        else:
            rho = _zeta_classical_input(spec, dim_a, rng)
        direct = apply_dilation(isometry, rho)
        factored = apply_channel(l_channel, apply_channel(n_channel, rho))
        factored = factored.permute(direct.labels)
        return trace_norm(direct.matrix - factored.matrix)

    residuals = ordered_map(residual, spawn_seeds(seed, trials))
    worst = float(max(residuals))
    logger.info(
        "Hadamard factorisation: worst residual %.3e over %d trials", worst, trials
    )
    return ClassCheckReport(
        check="hadamard-factorisation",
        trials=trials,
        worst_residual=worst,
        statement=f"worst residual {worst:.3e} over {trials} trials",
        caveat=(
            "coherent inputs; the factorisation holds only for zeta-classical inputs"
            if coherent
            else ""
        ),
    )


def hadamard_spec_from_vectors(
    zeta: Sequence[Sequence[complex]],
    eta: Sequence[Sequence[complex]],
    psi: Sequence[Sequence[complex]],
    in_shape: SubsystemShape,
    env_shape: SubsystemShape,
) -> HadamardSpec:
    """Build a spec from raw vectors; ``psi`` lists the basis vectors of B."""
    return HadamardSpec(
        tuple(PureState(np.asarray(z, dtype=complex), in_shape) for z in zeta),
        tuple(PureState(np.asarray(h, dtype=complex), env_shape) for h in eta),
        np.stack([np.asarray(p, dtype=complex) for p in psi], axis=1),
    )
