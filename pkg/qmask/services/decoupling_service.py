"""
Op-operator calculus and Monte Carlo checks of the decoupling bounds.

Includes:
- ``build_op`` turning a bipartite pure state into an operator between its halves
- The channel T(rho) = |A| Tr_B[op_{A->BK}(omega)(rho)] induced by omega_ABK
- Haar-sampled estimates of the i.i.d. decoupling bounds, with and without
  the G2 half of the shared maximally entangled state
- The unsmoothed one-shot bound and Uhlmann isometries
"""
import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from qmask.core.config import get_settings
from qmask.core.linalg import (
    SeedLike,
    SubsystemShape,
    check_dimension,
    haar_unitary,
    make_rng,
    permute_vector,
    trace_norm,
)
from qmask.exceptions import (
    ConfigurationError,
    EmbeddingError,
    LabelError,
    NumericalError,
)
from qmask.models.quantum import A, B, K, DensityOperator, KrausChannel, PureState
from qmask.models.schemas.reports import DecouplingReport, DecouplingRow, OneShotResult
from qmask.services.entropy_service import conditional_entropy, min_entropy
from qmask.services.quantum_service import (
    apply_isometry,
    maximally_entangled,
    state_vector,
    stinespring,
)
from qmask.utils.parallel import ordered_map, spawn_seeds

logger = logging.getLogger(__name__)

TP_WARNING_RESIDUAL = 1e-6
TRACE_NORM_CEILING = 2.0


# ---------------------------------------------------------------------------
# op operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OpOperator:
    """op_{from->to}(psi) = sum_ij a_ij |j><i| for psi = sum_ij a_ij |i>|j>."""

    matrix: np.ndarray
    from_shape: SubsystemShape
    to_shape: SubsystemShape
    source: PureState


def build_op(
    psi: Union[PureState, DensityOperator],
    from_labels: Sequence[str],
    to_labels: Sequence[str],
) -> OpOperator:
    """
    The operator from the ``from_labels`` half of psi to its ``to_labels`` half.

    Raises:
        PurityError: if a density operator of rank above one is passed
        LabelError: if the two halves do not partition psi's labels
    """
    if isinstance(psi, DensityOperator):
        psi = state_vector(psi)
    from_labels, to_labels = list(from_labels), list(to_labels)
    if set(from_labels) & set(to_labels) or set(from_labels + to_labels) != set(
        psi.labels
    ):
        raise LabelError(
            f"{from_labels} and {to_labels} must partition the state labels",
            psi.labels,
        )
    from_shape = psi.shape.subset(from_labels).reorder(from_labels)
    to_shape = psi.shape.subset(to_labels).reorder(to_labels)
    amps = permute_vector(psi.amplitudes, psi.shape, from_labels + to_labels)
    matrix = amps.reshape(from_shape.dim, to_shape.dim).T
    return OpOperator(matrix, from_shape, to_shape, psi)


def apply_op(op: OpOperator, state: PureState) -> Tuple[np.ndarray, SubsystemShape]:
    """
    op . |state>: act on the ``from`` factors of state, leave the rest.

    The result is generally unnormalised, so the raw vector is returned with
    its shape (remaining factors first, then the ``to`` factors).
    """
    state.shape.check_labels(op.from_shape.labels)
    for label, dim in op.from_shape.pairs():
        if state.shape.dim_of([label]) != dim:
            raise LabelError(f"dimension mismatch on {label!r}", state.labels)
    rest = state.shape.without(op.from_shape.labels)
    amps = permute_vector(
        state.amplitudes, state.shape, rest.labels + op.from_shape.labels
    )
    out = amps.reshape(rest.dim, op.from_shape.dim) @ op.matrix.T
    return out.reshape(-1), rest.concat(op.to_shape)


def t_channel(
    omega: Union[PureState, DensityOperator],
    a_label: str = A,
    b_labels: Sequence[str] = (B,),
    k_labels: Sequence[str] = (K,),
) -> KrausChannel:
    """
    T_{A->K}(rho) = |A| Tr_B[op_{A->BK}(omega)(rho)].

    One Kraus operator per basis vector b of B: sqrt|A| (<b|_B (x) I_K) op.
    A trace-preservation residual above 1e-6 is logged as a configuration
    warning; it means omega_A is not maximally mixed.
    """
    b_labels, k_labels = list(b_labels), list(k_labels)
    op = build_op(omega, [a_label], b_labels + k_labels)
    d_a = op.from_shape.dim
    d_b = op.to_shape.dim_of(b_labels)
    d_k = op.to_shape.dim_of(k_labels)
    blocks = op.matrix.reshape(d_b, d_k, d_a)
    ops = tuple(math.sqrt(d_a) * blocks[b] for b in range(d_b))
    channel = KrausChannel(
        ops, op.from_shape, op.to_shape.subset(k_labels).reorder(k_labels), check=False
    )
    residual = channel.completeness_residual()
    if residual > TP_WARNING_RESIDUAL:
        logger.warning(
            "T channel is not trace preserving (residual %.3e); omega does not "
            "induce a channel",
            residual,
        )
    return channel


# ---------------------------------------------------------------------------
# i.i.d. decoupling
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DecouplingConfig:
    """
    Monte Carlo setup: omega over (A, B, K), dims of S and G, blocklengths.

    ``epsilon`` is the surrogate for the vanishing slack eps(n); it defaults
    to 0 and enters the bounds as 2^{n eps}.
    """

    omega: PureState
    dim_s: int = 1
    dim_g: int = 1
    blocklengths: Tuple[int, ...] = (1, 2, 3)
    samples: int = 200
    epsilon: float = 0.0
    seed: int = 0
    a_label: str = A
    b_labels: Tuple[str, ...] = (B,)
    k_labels: Tuple[str, ...] = (K,)

    def __post_init__(self):
        if isinstance(self.omega, DensityOperator):
            object.__setattr__(self, "omega", state_vector(self.omega))
        object.__setattr__(self, "blocklengths", tuple(self.blocklengths))
        object.__setattr__(self, "b_labels", tuple(self.b_labels))
        object.__setattr__(self, "k_labels", tuple(self.k_labels))
        if self.samples < 1:
            raise ConfigurationError(f"samples must be >= 1, got {self.samples}")
        if self.dim_s < 1 or self.dim_g < 1:
            raise ConfigurationError("dim_s and dim_g must be >= 1")
        if not self.blocklengths or min(self.blocklengths) < 1:
            raise ConfigurationError("blocklengths must be positive")
        if self.epsilon < 0:
            raise ConfigurationError(f"epsilon must be >= 0, got {self.epsilon}")


def _letter_isometry(channel: KrausChannel) -> np.ndarray:
    """Stack the Kraus operators into V[(k, b), a] = K_b[k, a]."""
    ops = channel.stacked
    return ops.transpose(1, 0, 2).reshape(-1, channel.in_shape.dim)


def _output_state(
    columns: np.ndarray, v: np.ndarray, n: int, d_a: int, d_k: int, d_b: int
) -> np.ndarray:
    """
    (T^{(x)n} (x) id)(Y Y^dag) for Y of shape (d_a^n, m), as a matrix over (K^n, m).

    Each letter's Kraus index is carried as an environment factor and traced
    at the end, which avoids forming the input density operator.
    """
    m = columns.shape[1]
    y = columns.reshape((d_a,) * n + (m,))
    for i in range(n):
        y = np.moveaxis(np.tensordot(v, y, axes=([1], [i])), 0, i)
    y = y.reshape(sum(((d_k, d_b) for _ in range(n)), ()) + (m,))
    k_axes = [2 * i for i in range(n)]
    b_axes = [2 * i + 1 for i in range(n)]
    y = y.transpose(k_axes + [2 * n] + b_axes)
    z = y.reshape(d_k**n * m, d_b**n)
    return z @ z.conj().T


def _power(matrix: np.ndarray, n: int) -> np.ndarray:
    out = matrix
    for _ in range(n - 1):
        out = np.kron(out, matrix)
    return out


class DecouplingService:
    """Haar Monte Carlo estimates of the i.i.d. decoupling bounds."""

    def __init__(self, config: DecouplingConfig):
        self.config = config
        cfg = config
        self.channel = t_channel(cfg.omega, cfg.a_label, cfg.b_labels, cfg.k_labels)
        self.omega_k = cfg.omega.reduce(cfg.k_labels).permute(cfg.k_labels).matrix
        self.h_a_given_k = conditional_entropy(cfg.omega, [cfg.a_label], cfg.k_labels)
        self.d_a = self.channel.in_shape.dim
        self.d_k = self.channel.out_shape.dim
        self.d_b = self.channel.rank
        self.v = _letter_isometry(self.channel)

    def rhs(self, n: int) -> Tuple[float, float]:
        """Right-hand sides of the bounds without and with G2."""
        cfg = self.config
        core = 2.0 ** (-n * self.h_a_given_k + n * cfg.epsilon)
        return (
            math.sqrt(cfg.dim_s / cfg.dim_g * core),
            math.sqrt(cfg.dim_s * cfg.dim_g * core),
        )

    def _check_dims(self, n: int) -> None:
        settings = get_settings()
        cfg = self.config
        d_total = self.d_a**n
        check_dimension(d_total, settings.DECOUPLING_DIM_CAP, what=f"A^{n}")
        if cfg.dim_s * cfg.dim_g > d_total:
            raise ConfigurationError(
                f"|S||G| = {cfg.dim_s * cfg.dim_g} does not embed into A^{n} "
                f"of dimension {d_total}"
            )
        work = (self.d_k * self.d_b) ** n * cfg.dim_s * cfg.dim_g
        check_dimension(work, settings.DIM_CAP**2 // 16, what="decoupling workspace")

    def _sample(self, n: int, child: np.random.SeedSequence) -> Tuple[float, float]:
        """Distances without and with G2 for one Haar unitary."""
        cfg = self.config
        s, g = cfg.dim_s, cfg.dim_g
        m = s * g
        u = haar_unitary(self.d_a**n, make_rng(child))
        # W embeds (S, G1) as the first s*g basis vectors, paired with (R, G2)
        columns = u[:, :m] / math.sqrt(m)
        out = _output_state(columns, self.v, n, self.d_a, self.d_k, self.d_b)
        omega_n = _power(self.omega_k, n)
        d_kn = omega_n.shape[0]

        target_shared = np.kron(omega_n, np.eye(m) / m)
        distance_shared = trace_norm(out - target_shared)

        reduced = np.einsum(
            "xrgyqg->xryq", out.reshape(d_kn, s, g, d_kn, s, g)
        ).reshape(d_kn * s, d_kn * s)
        target = np.kron(omega_n, np.eye(s) / s)
        distance = trace_norm(reduced - target)
        return distance, distance_shared

    def _row(self, n: int) -> DecouplingRow:
        cfg = self.config
        self._check_dims(n)
        seeds = spawn_seeds(cfg.seed, cfg.samples, n)
        results = np.array(ordered_map(lambda child: self._sample(n, child), seeds))
        ddof = 1 if cfg.samples > 1 else 0
        mean, mean_shared = results.mean(axis=0)
        std, std_shared = results.std(axis=0, ddof=ddof)
        err = std / math.sqrt(cfg.samples)
        err_shared = std_shared / math.sqrt(cfg.samples)
        rhs, rhs_shared = self.rhs(n)
        vacuous = rhs > TRACE_NORM_CEILING
        vacuous_shared = rhs_shared > TRACE_NORM_CEILING
        row = DecouplingRow(
            n=n,
            samples=cfg.samples,
            mean=float(mean),
            std=float(std),
            stderr=float(err),
            mean_shared=float(mean_shared),
            std_shared=float(std_shared),
            stderr_shared=float(err_shared),
            rhs=rhs,
            rhs_shared=rhs_shared,
            sensitivity=rhs * n * math.log(2) / 2,
            sensitivity_shared=rhs_shared * n * math.log(2) / 2,
            vacuous=vacuous,
            vacuous_shared=vacuous_shared,
            passed=vacuous or mean + 2 * err <= rhs,
            passed_shared=vacuous_shared or mean_shared + 2 * err_shared <= rhs_shared,
        )
        logger.info(
            "n=%d: mean %.4f (rhs %.4f), with G2 %.4f (rhs %.4f)",
            n,
            row.mean,
            rhs,
            row.mean_shared,
            rhs_shared,
        )
        return row

    def run(self) -> DecouplingReport:
        cfg = self.config
        rows = [self._row(n) for n in cfg.blocklengths]
        return DecouplingReport(
            dim_s=cfg.dim_s,
            dim_g=cfg.dim_g,
            h_a_given_k=self.h_a_given_k,
            epsilon=cfg.epsilon,
            seed=cfg.seed,
            rows=rows,
        )


def channel_omega(
    channel: KrausChannel, a_label: str = A, env_label: str = K
) -> PureState:
    """omega_ABK = (I_A (x) V) Phi_AA' for the Stinespring isometry V of ``channel``."""
    if len(channel.in_shape) != 1:
        raise LabelError("omega needs a single-input channel", channel.in_shape.labels)
    dil = stinespring(channel, env_label)
    phi = maximally_entangled(
        channel.in_shape.dim, (a_label, channel.in_shape.labels[0])
    )
    return apply_isometry(dil.isometry, phi, dil.in_shape, dil.out_shape)


def run_iid_decoupling(cfg: DecouplingConfig) -> DecouplingReport:
    """Estimate both decoupling distances for every blocklength in ``cfg``."""
    return DecouplingService(cfg).run()


# ---------------------------------------------------------------------------
# One-shot bound and Uhlmann
# ---------------------------------------------------------------------------


def one_shot_rhs(
    zeta: DensityOperator,
    rho: DensityOperator,
    zeta_cond: Sequence[str] = (K,),
    rho_cond: Sequence[str] = ("R",),
    seed: SeedLike = 0,
) -> OneShotResult:
    """
    2^{-H_min(A'|K)_zeta/2 - H_min(A|R)_rho/2} with unsmoothed min-entropies.

    Both min-entropies are certified lower bounds, so the value returned
    upper-bounds the unsmoothed expression.
    """
    hz = min_entropy(zeta, zeta_cond, seed=seed).value
    hr = min_entropy(rho, rho_cond, seed=seed).value
    return OneShotResult(value=2.0 ** (-(hz + hr) / 2), hmin_zeta=hz, hmin_rho=hr)


@dataclass(frozen=True)
class UhlmannResult:
    """Isometry F_{B->C}, achieved distance, marginal distance and the bound."""

    isometry: np.ndarray
    distance: float
    marginal_distance: float
    bound: float


def _amplitude_matrix(state: PureState, first: str) -> Tuple[np.ndarray, str]:
    if len(state.labels) != 2 or first not in state.labels:
        raise LabelError(
            f"expected a bipartite state containing {first!r}", state.labels
        )
    other = state.labels[1] if state.labels[0] == first else state.labels[0]
    amps = permute_vector(state.amplitudes, state.shape, [first, other])
    return amps.reshape(state.shape.dim_of([first]), state.shape.dim_of([other])), other


def uhlmann_isometry(
    psi: PureState, theta: PureState, a_label: str = A
) -> UhlmannResult:
    """
    F_{B->C} maximising the overlap of (I (x) F) psi_AB with theta_AC.

    With Y = M_theta^dag M_psi = P S Q^dag (thin SVD), F = conj(P) Q^T; when
    dim C < dim B this is a partial isometry, which is enough as long as the
    Schmidt rank of psi fits into C.

    Raises:
        EmbeddingError: if dim C is below the Schmidt rank of psi
        NumericalError: if the achieved distance exceeds 2 sqrt(eps)
    """
    m_psi, _ = _amplitude_matrix(psi, a_label)
    m_theta, _ = _amplitude_matrix(theta, a_label)
    if m_psi.shape[0] != m_theta.shape[0]:
        raise LabelError(f"{a_label!r} dimensions differ", psi.labels)
    d_c = m_theta.shape[1]
    schmidt = np.linalg.svd(m_psi, compute_uv=False)
    rank = int(np.sum(schmidt > 1e-12))
    if d_c < rank:
        raise EmbeddingError(rank, d_c)

    p, _, qh = np.linalg.svd(m_theta.conj().T @ m_psi)
    r = min(m_psi.shape[1], d_c)
    f = (qh.conj().T[:, :r] @ p[:, :r].conj().T).T

    mapped = (m_psi @ f.T).reshape(-1)
    target = m_theta.reshape(-1)
    distance = trace_norm(
        np.outer(mapped, mapped.conj()) - np.outer(target, target.conj())
    )
    marginal = trace_norm(
        m_psi @ m_psi.conj().T - m_theta @ m_theta.conj().T
    )
    bound = 2 * math.sqrt(marginal)
    if distance > bound + 1e-9:
        raise NumericalError(
            f"Uhlmann distance {distance:.3e} exceeds bound {bound:.3e}",
            distance - bound,
        )
    return UhlmannResult(f, distance, marginal, bound)
