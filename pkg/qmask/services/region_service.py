"""
Rate-leakage regions of state-dependent channels.

Includes:
- ``MaskingInstance`` with the purification lift and two-letter powers
- Parameterised input-candidate families whose (E, C) marginal equals
  phi_EC by construction
- Evaluation of the rate-limited, entanglement-assisted, unassisted-inner and
  Hadamard-outer expressions on a candidate
- Pattern-search optimisation of the rate objectives over a leakage grid
- Closed forms for the dephasing example and erasure reference values

Every optimised value is an achievable lower bound on the true supremum;
the Hadamard outer expression is an upper-bound evaluation per candidate.
"""
import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from qmask.core.linalg import (
    SubsystemShape,
    check_dimension,
    haar_unitary,
    hermitian_basis,
    make_rng,
    permute_vector,
    trace_norm,
)
from qmask.exceptions import (
    ConfigurationError,
    ConstraintError,
    LabelError,
    NumericalError,
)
from qmask.models.quantum import (
    A,
    ChannelStateTriple,
    DensityOperator,
    IsometricDilation,
    KrausChannel,
    PureState,
)
from qmask.models.schemas.reports import (
    ACHIEVABLE,
    INNER_ONLY,
    OUTER_EVALUATION,
    CodingExponents,
    DephasingFrontiers,
    EntropyTerms,
    Frontier,
    RateLeakagePoint,
    RateLimitedRegion,
)
from qmask.services.entropy_service import (
    conditional_entropy,
    conditional_mutual_information,
    entropy_of,
    h2,
    star,
)
from qmask.services.optimizer import PatternSearch
from qmask.services.quantum_service import (
    apply_channel,
    apply_dilation,
    channel_power,
    lift_channel,
    purify_channel_state,
    state_power,
    state_vector,
)
from qmask.services.zoo_service import DephasingSpec, dephasing_channel
from qmask.utils.parallel import ordered_map, spawn_seeds

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-8
LEAKAGE_TOL = 1e-9
INFEASIBLE_PENALTY = 1e3

OBJECTIVES = (
    "ea",
    "ea_classical",
    "unassisted_inner",
    "hadamard_outer",
    "ea_capacity_leakage",
    "ea_classical_capacity_leakage",
)
FAMILIES = ("controlled", "product", "free")


# ---------------------------------------------------------------------------
# Instances and candidates
# ---------------------------------------------------------------------------


def is_maximally_correlated(triple: ChannelStateTriple, tol: float = 1e-12) -> bool:
    """True when the state is sum_s q(s) |sss><sss| over (E, E0, C)."""
    if len(triple.e_labels) != len(triple.e0_labels) or len(triple.e_labels) != len(
        triple.c_labels
    ):
        return False
    dims = {triple.e_dim, triple.e0_dim, triple.c_dim}
    if len(dims) != 1 or triple.t_labels:
        return False
    d = dims.pop()
    order = list(triple.e_labels + triple.e0_labels + triple.c_labels)
    m = triple.state.permute(order).matrix
    allowed = np.zeros(m.shape[0], dtype=bool)
    for s in range(d):
        allowed[s * d * d + s * d + s] = True
    off = m - np.diag(np.diag(m))
    return bool(
        np.max(np.abs(off), initial=0.0) <= tol
        and np.max(np.abs(np.diag(m)[~allowed]), initial=0.0) <= tol
    )


@dataclass(frozen=True, eq=False)
class MaskingInstance:
    """
    A channel over (E, A') -> B together with its channel-state triple.

    ``dilation`` is only needed for the Hadamard outer bound; its input
    labels must match the channel's. ``letters`` counts channel uses per
    evaluation, so rates and leakages are divided by it.
    """

    channel: KrausChannel
    triple: ChannelStateTriple
    dilation: Optional[IsometricDilation] = None
    letters: int = 1
    maximally_correlated: Optional[bool] = field(default=None, repr=False)

    def __post_init__(self):
        in_shape = self.channel.in_shape
        state_shape = self.triple.state.shape
        for label in self.triple.state_labels:
            if label not in in_shape or in_shape.dim_of([label]) != state_shape.dim_of(
                [label]
            ):
                raise LabelError(
                    f"channel input lacks state system {label!r} of matching dimension",
                    in_shape.labels,
                )
        if self.dilation is not None and set(self.dilation.in_shape.labels) != set(
            in_shape.labels
        ):
            raise LabelError(
                "dilation and channel inputs differ", self.dilation.in_shape.labels
            )
        if self.maximally_correlated is None:
            object.__setattr__(
                self, "maximally_correlated", is_maximally_correlated(self.triple)
            )

    @property
    def a_prime(self) -> SubsystemShape:
        return self.channel.in_shape.without(self.triple.state_labels)

    @property
    def b_labels(self) -> Tuple[str, ...]:
        return self.channel.out_shape.labels

    @property
    def is_lifted(self) -> bool:
        return bool(self.triple.t_labels)

    def phi_ec(self) -> DensityOperator:
        return self.triple.marginal(self.triple.state_labels + self.triple.c_labels)

    def h_c(self) -> float:
        return entropy_of(self.triple.state, self.triple.c_labels)

    def lifted(self) -> "MaskingInstance":
        """
        The lift through a purification T of phi_EE0C.

        The channel takes T as an extra input and discards it; the dilation,
        when present, routes T to the environment.
        """
        if self.is_lifted:
            return self
        purified, _ = purify_channel_state(self.triple)
        t_shape = purified.state.shape.subset(purified.t_labels)
        dilation = None
        if self.dilation is not None:
            dil = self.dilation
            dilation = IsometricDilation(
                np.kron(np.eye(t_shape.dim), dil.isometry),
                t_shape.concat(dil.in_shape),
                t_shape.concat(dil.out_shape),
                dil.env_labels + t_shape.labels,
            )
        return MaskingInstance(
            lift_channel(self.channel, t_shape),
            purified,
            dilation,
            self.letters,
            self.maximally_correlated,
        )

    def power(self, k: int) -> "MaskingInstance":
        return power_instance(self, k)


def _suffixed(labels: Sequence[str], k: int) -> Tuple[str, ...]:
    return tuple(f"{lab}.{i}" for i in range(1, k + 1) for lab in labels)


def _dilation_power(dil: IsometricDilation, k: int) -> IsometricDilation:
    v = dil.isometry
    in_shape, out_shape = None, None
    for i in range(1, k + 1):
        ins = dil.in_shape.suffixed(f".{i}")
        outs = dil.out_shape.suffixed(f".{i}")
        in_shape = ins if in_shape is None else in_shape.concat(ins)
        out_shape = outs if out_shape is None else out_shape.concat(outs)
    big = v
    for _ in range(k - 1):
        big = np.kron(big, v)
    return IsometricDilation(big, in_shape, out_shape, _suffixed(dil.env_labels, k))


def power_instance(instance: MaskingInstance, k: int) -> MaskingInstance:
    """
    k parallel uses with phi^{(x)k}; only k in {1, 2} is supported.

    Labels gain the suffixes ``.1`` ... ``.k`` and rates are reported per use.
    """
    if k == 1:
        return instance
    if k != 2:
        raise ConfigurationError(f"only one or two letters are supported, got {k}")
    if instance.is_lifted:
        raise ConfigurationError("take powers before lifting")
    t = instance.triple
    triple = ChannelStateTriple(
        state_power(t.state, k),
        e_labels=_suffixed(t.e_labels, k),
        e0_labels=_suffixed(t.e0_labels, k),
        c_labels=_suffixed(t.c_labels, k),
    )
    dilation = (
        None if instance.dilation is None else _dilation_power(instance.dilation, k)
    )
    return MaskingInstance(
        channel_power(instance.channel, k),
        triple,
        dilation,
        instance.letters * k,
    )


@dataclass(frozen=True, eq=False)
class InputCandidate:
    """A state over (A, [T], E, A', C) and the family member that produced it."""

    state: DensityOperator
    family: str = "explicit"
    params: Tuple[float, ...] = ()


def _require_feasible(instance: MaskingInstance, cand: InputCandidate) -> None:
    labels = instance.triple.state_labels + instance.triple.c_labels
    cand.state.shape.check_labels(labels)
    reduced = cand.state.reduce(labels).permute(labels).matrix
    target = instance.phi_ec().permute(labels).matrix
    residual = trace_norm(reduced - target)
    if residual > FEASIBILITY_TOL:
        raise ConstraintError(residual)


def _instance_for(instance: MaskingInstance, cand: InputCandidate) -> MaskingInstance:
    lifted = instance.lifted()
    if all(lab in cand.state.labels for lab in lifted.triple.t_labels):
        return lifted
    if instance.is_lifted:
        raise LabelError("candidate lacks the purifying system", cand.state.labels)
    return instance


# ---------------------------------------------------------------------------
# Candidate families
# ---------------------------------------------------------------------------


def _act(
    op: np.ndarray,
    vec: np.ndarray,
    shape: SubsystemShape,
    in_labels: Sequence[str],
    out_shape: SubsystemShape,
) -> Tuple[np.ndarray, SubsystemShape]:
    """Apply a (not necessarily isometric) operator to some factors of a vector."""
    in_labels = list(in_labels)
    rest = shape.without(in_labels)
    amps = permute_vector(vec, shape, list(rest.labels) + in_labels)
    out = amps.reshape(rest.dim, shape.dim_of(in_labels)) @ op.T
    return out.reshape(-1), rest.concat(out_shape)


def _maximally_entangled_vector(
    a_prime: SubsystemShape,
) -> Tuple[np.ndarray, SubsystemShape]:
    d = a_prime.dim
    shape = SubsystemShape.of((A, d)).concat(a_prime)
    return np.eye(d, dtype=complex).reshape(-1) / math.sqrt(d), shape


def _unitary(
    theta: np.ndarray, basis: List[np.ndarray], scale: float = math.pi
) -> np.ndarray:
    generator = sum(t * h for t, h in zip(theta, basis))
    return expm(1j * scale * generator)


def _clock(d: int) -> np.ndarray:
    return np.diag(np.exp(2j * math.pi * np.arange(d) / d))


def _softmax(x: np.ndarray) -> np.ndarray:
    z = np.exp(x - np.max(x))
    return z / z.sum()


class CandidateFamily:
    """
    Parameterised feasible inputs for a lifted instance.

    Subclasses implement ``build(params)`` and list their ``canonical``
    parameter vectors; optimiser restarts begin with those, in order.
    """

    name = "family"

    def __init__(self, instance: MaskingInstance):
        self.instance = instance.lifted()
        t = self.instance.triple
        self.psi = state_vector(t.state)
        self.a_prime = self.instance.a_prime
        self.order = (
            [A] + list(t.state_labels) + list(self.a_prime.labels) + list(t.c_labels)
        )

    @property
    def size(self) -> int:
        raise NotImplementedError

    @property
    def canonical(self) -> List[np.ndarray]:
        return [np.zeros(self.size)]

    def build(self, params: Sequence[float]) -> InputCandidate:
        raise NotImplementedError

    def random_params(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-0.5, 0.5, self.size)

    def _candidate(
        self, matrix: np.ndarray, shape: SubsystemShape, params
    ) -> InputCandidate:
        state = DensityOperator(matrix, shape, check=False).permute(self.order)
        return InputCandidate(state, self.name, tuple(float(p) for p in params))


class ControlledFamily(CandidateFamily):
    """
    Phi_AA' followed by a unitary on A' chosen by the E0 basis value.

    U_s = expm(i pi sum_k theta_{s,k} H_k) with H_k the traceless Hermitian
    basis, then a clock dither applied with probability lambda = params[0]
    clipped to [0, 1]; E0 is discarded. On a qubit A' the second canonical
    member pre-flips with Z on odd E0 values.
    """

    name = "controlled"

    def __init__(self, instance: MaskingInstance):
        super().__init__(instance)
        self.basis = hermitian_basis(self.a_prime.dim)
        self.d_e0 = self.instance.triple.e0_dim

    @property
    def size(self) -> int:
        return 1 + self.d_e0 * len(self.basis)

    @property
    def canonical(self) -> List[np.ndarray]:
        starts = [np.zeros(self.size)]
        if self.a_prime.dim == 2 and self.d_e0 > 1:
            preflip = np.zeros(self.size)
            z_index = len(self.basis) - 1
            for s in range(1, self.d_e0, 2):
                preflip[1 + s * len(self.basis) + z_index] = 0.5
            starts.append(preflip)
        return starts

    def unitaries(self, params: Sequence[float]) -> List[np.ndarray]:
        thetas = np.asarray(params[1:], dtype=float).reshape(self.d_e0, len(self.basis))
        return [_unitary(theta, self.basis) for theta in thetas]

    def build(self, params: Sequence[float]) -> InputCandidate:
        lam = float(np.clip(params[0], 0.0, 1.0))
        t = self.instance.triple
        phi_vec, phi_shape = _maximally_entangled_vector(self.a_prime)
        vec = np.kron(self.psi.amplitudes, phi_vec)
        shape = self.psi.shape.concat(phi_shape)
        e0_shape = shape.subset(t.e0_labels).reorder(t.e0_labels)
        in_labels = list(t.e0_labels) + list(self.a_prime.labels)
        dither = [(1.0 - lam, np.eye(self.a_prime.dim))]
        if lam > 0:
            dither.append((lam, _clock(self.a_prime.dim)))
        matrix, out_shape = None, None
        for s, u in enumerate(self.unitaries(params)):
            bra = np.zeros((1, e0_shape.dim), dtype=complex)
            bra[0, s] = 1.0
            for weight, z in dither:
                op = math.sqrt(weight) * np.kron(bra, z @ u)
                out, out_shape = _act(op, vec, shape, in_labels, self.a_prime)
                term = np.outer(out, out.conj())
                matrix = term if matrix is None else matrix + term
        return self._candidate(matrix, out_shape, params)


class ProductFamily(CandidateFamily):
    """
    phi_TEC (x) omega_AA' with omega = sum_i sqrt(p_i) |i>_A U|i>_A'.

    p = softmax(logits) and U = expm(i pi sum theta_k H_k); the zero vector
    gives Phi_AA'.
    """

    name = "product"

    def __init__(self, instance: MaskingInstance):
        super().__init__(instance)
        self.basis = hermitian_basis(self.a_prime.dim)
        t = self.instance.triple
        self.phi = t.marginal(t.state_labels + t.c_labels)

    @property
    def size(self) -> int:
        return self.a_prime.dim + len(self.basis)

    def omega(self, params: Sequence[float]) -> PureState:
        d = self.a_prime.dim
        params = np.asarray(params, dtype=float)
        p = _softmax(params[:d])
        u = _unitary(params[d:], self.basis)
        amps = (np.diag(np.sqrt(p)) @ u.T).reshape(-1)
        shape = SubsystemShape.of((A, d)).concat(self.a_prime)
        return PureState.normalized(amps, shape)

    def build(self, params: Sequence[float]) -> InputCandidate:
        omega = self.omega(params).density()
        state = self.phi.tensor(omega)
        return self._candidate(state.matrix, state.shape, params)


class FreeFamily(CandidateFamily):
    """
    Pure candidates: an isometry E0 -> A A' from a Haar-seeded start,
    rotated by expm(i pi sum theta_k H_k) on (A, A').

    |A| defaults to |A'| |E| |C|.
    """

    name = "free"

    def __init__(
        self, instance: MaskingInstance, dim_a: Optional[int] = None, seed: int = 0
    ):
        super().__init__(instance)
        t = self.instance.triple
        self.dim_a = dim_a or self.a_prime.dim * t.e_dim * t.c_dim
        self.out_shape = SubsystemShape.of((A, self.dim_a)).concat(self.a_prime)
        check_dimension(self.out_shape.dim**2, what="free-family generator space")
        self.basis = hermitian_basis(self.out_shape.dim)
        d_e0 = t.e0_dim
        if d_e0 > self.out_shape.dim:
            raise ConfigurationError("A A' too small to embed E0")
        self.seed_isometry = haar_unitary(self.out_shape.dim, make_rng(seed))[:, :d_e0]

    @property
    def size(self) -> int:
        return len(self.basis)

    def random_params(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-0.1, 0.1, self.size)

    def build(self, params: Sequence[float]) -> InputCandidate:
        t = self.instance.triple
        w = _unitary(np.asarray(params, dtype=float), self.basis) @ self.seed_isometry
        vec, shape = _act(
            w, self.psi.amplitudes, self.psi.shape, t.e0_labels, self.out_shape
        )
        return self._candidate(np.outer(vec, vec.conj()), shape, params)


def make_family(instance: MaskingInstance, name: str, **kwargs) -> CandidateFamily:
    families = {
        "controlled": ControlledFamily,
        "product": ProductFamily,
        "free": FreeFamily,
    }
    if name not in families:
        raise ConfigurationError(
            f"unknown candidate family {name!r}; use one of {FAMILIES}"
        )
    return families[name](instance, **kwargs)


def product_candidate(
    instance: MaskingInstance, omega: Optional[PureState] = None
) -> InputCandidate:
    """phi (x) omega_AA' for an explicit omega (Phi_AA' by default)."""
    family = ProductFamily(instance)
    if omega is None:
        return family.build(np.zeros(family.size))
    state = family.phi.tensor(omega.density())
    return family._candidate(state.matrix, state.shape, ())


def dephasing_candidate(
    spec: DephasingSpec, lam: float, use_csi: bool
) -> Tuple[MaskingInstance, InputCandidate]:
    """
    The explicit dephasing inputs: Phi_AA' with a Z dither of probability
    ``lam``; with ``use_csi`` the encoder also pre-flips with Z when s = 1.
    """
    channel, triple = dephasing_channel(spec)
    instance = MaskingInstance(channel, triple)
    family = ControlledFamily(instance)
    params = family.canonical[1] if use_csi else family.canonical[0]
    params = params.copy()
    params[0] = lam
    return instance, family.build(params)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Evaluation:
    inst: MaskingInstance
    terms: EntropyTerms
    letters: int


def _evaluate(
    instance: MaskingInstance, cand: InputCandidate, outer: bool = False
) -> _Evaluation:
    inst = _instance_for(instance, cand)
    _require_feasible(inst, cand)
    t = inst.triple
    ec = list(t.state_labels + t.c_labels)
    c = list(t.c_labels)
    b = list(inst.b_labels)
    rho = cand.state
    out = apply_channel(inst.channel, rho)
    k = inst.letters

    h_a_ec = conditional_entropy(rho, [A], ec)
    icoh = entropy_of(out, b) - entropy_of(out, [A] + b)
    i_c_ab = conditional_mutual_information(out, c, [A] + b)
    h_c = entropy_of(t.state, c)
    if i_c_ab > 2 * h_c + LEAKAGE_TOL:
        raise NumericalError(
            f"I(C;AB) = {i_c_ab:.12g} exceeds 2 H(C) = {2 * h_c:.12g}", i_c_ab - 2 * h_c
        )
    h_a_ck = None
    if outer:
        if inst.dilation is None:
            raise ConfigurationError("the Hadamard outer bound needs a dilation")
        full = apply_dilation(inst.dilation, rho)
        h_a_ck = conditional_entropy(full, [A], c + list(inst.dilation.env_labels)) / k
    terms = EntropyTerms(
        h_a_given_ec=h_a_ec / k,
        icoh=icoh / k,
        i_c_ab=max(0.0, i_c_ab) / k,
        i_ab=conditional_mutual_information(out, [A], b) / k,
        i_a_ec=conditional_mutual_information(rho, [A], ec) / k,
        h_a_given_ck=h_a_ck,
        h_c=h_c / k,
    )
    return _Evaluation(inst, terms, k)


def _point(
    ev: _Evaluation,
    cand: InputCandidate,
    rate: float,
    rate_kind: str = "Q",
    entanglement_rate: Optional[float] = None,
    bound: str = ACHIEVABLE,
) -> RateLeakagePoint:
    flag = "ok"
    if bound == INNER_ONLY:
        flag = "inner bound only"
    return RateLeakagePoint(
        family=cand.family,
        params=list(cand.params),
        rate_kind=rate_kind,
        rate=max(0.0, rate),
        leakage=ev.terms.i_c_ab,
        entanglement_rate=entanglement_rate,
        terms=ev.terms,
        aux_dim=cand.state.shape.dim_of([A]),
        letters=ev.letters,
        bound=bound,
        flag=flag,
    )


def eval_rate_limited(
    instance: MaskingInstance, cand: InputCandidate
) -> RateLimitedRegion:
    """
    Q + R_e <= H(A|EC), Q - R_e <= I(A>B), L >= I(C;AB) with its corners.

    Corners: the unassisted point (min(h, i), 0) and, when H(A|EC) exceeds
    I(A>B), the entanglement-assisted corner ((h + i)/2, (h - i)/2).
    """
    ev = _evaluate(instance, cand)
    h, i = ev.terms.h_a_given_ec, ev.terms.icoh
    corners = [_point(ev, cand, min(h, i), entanglement_rate=0.0)]
    if h > i and h + i > 0:
        corners.append(_point(ev, cand, (h + i) / 2, entanglement_rate=(h - i) / 2))
    return RateLimitedRegion(
        h_a_given_ec=h, icoh=i, leakage_floor=ev.terms.i_c_ab, corners=corners
    )


def _ea_bound(ev: _Evaluation) -> str:
    return ACHIEVABLE if ev.inst.maximally_correlated else INNER_ONLY


def eval_ea_point(
    instance: MaskingInstance, cand: InputCandidate, classical: bool = False
) -> RateLeakagePoint:
    """
    Q = [I(A;B) - I(A;EC)]/2 (R = twice that) at L = I(C;AB).

    The entanglement consumed is R_e = [H(A|EC) - I(A>B)]/2. For triples that
    are not maximally correlated the point is labelled "inner bound only".
    """
    ev = _evaluate(instance, cand)
    terms = ev.terms
    q = max(0.0, (terms.i_ab - terms.i_a_ec) / 2)
    r_e = max(0.0, (terms.h_a_given_ec - terms.icoh) / 2)
    if classical:
        return _point(ev, cand, 2 * q, "R", r_e, _ea_bound(ev))
    return _point(ev, cand, q, "Q", r_e, _ea_bound(ev))


def eval_unassisted_inner(
    instance: MaskingInstance, cand: InputCandidate
) -> RateLeakagePoint:
    """Q = min(I(A>B), H(A|EC)) clamped at 0, L = I(C;AB)."""
    ev = _evaluate(instance, cand)
    return _point(ev, cand, min(ev.terms.icoh, ev.terms.h_a_given_ec))


def eval_hadamard_outer(
    instance: MaskingInstance, cand: InputCandidate
) -> RateLeakagePoint:
    """
    Q = H(A|CK) on V rho V^dag, L = I(C;AB).

    K is the whole environment of the lifted dilation, which includes the
    purifying system T.

    Raises:
        ConfigurationError: if the instance carries no dilation
    """
    ev = _evaluate(instance, cand, outer=True)
    return _point(ev, cand, ev.terms.h_a_given_ck, bound=OUTER_EVALUATION)


def coding_exponents(
    point: RateLeakagePoint,
    rate: float,
    entanglement_rate: float,
    n: int,
    eps: float = 0.0,
    dim_b: int = 2,
) -> CodingExponents:
    """
    Random-coding diagnostics at blocklength n.

    Delta1 = 2^{-n[H(A|EC) - Q - R_e - eps]/2}, Delta2 = 2^{-n[I(A>B) - Q + R_e - eps]};
    error bound 2 sqrt(Delta1) + Delta2 and per-use leakage excess
    [4 n log|B| sqrt(Delta1) + 2 (1 + sqrt(Delta1))] / n.
    """
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    terms = point.terms
    delta1 = 2.0 ** (-n * (terms.h_a_given_ec - rate - entanglement_rate - eps) / 2)
    delta2 = 2.0 ** (-n * (terms.icoh - rate + entanglement_rate - eps))
    root = math.sqrt(delta1)
    return CodingExponents(
        n=n,
        delta1=delta1,
        delta2=delta2,
        error_bound=2 * root + delta2,
        leakage_excess=(4 * n * math.log2(dim_b) * root + 2 * (1 + root)) / n,
    )


# ---------------------------------------------------------------------------
# Optimisation
# ---------------------------------------------------------------------------


def _rate_function(
    instance: MaskingInstance, objective: str
) -> Callable[[InputCandidate], RateLeakagePoint]:
    if objective in ("ea", "ea_capacity_leakage"):
        return lambda cand: eval_ea_point(instance, cand)
    if objective in ("ea_classical", "ea_classical_capacity_leakage"):
        return lambda cand: eval_ea_point(instance, cand, classical=True)
    if objective == "unassisted_inner":
        return lambda cand: eval_unassisted_inner(instance, cand)
    if objective == "hadamard_outer":
        return lambda cand: eval_hadamard_outer(instance, cand)
    raise ConfigurationError(
        f"unknown objective {objective!r}; use one of {OBJECTIVES}"
    )


def _score(point: RateLeakagePoint, cap: Optional[float]) -> float:
    if cap is None or point.leakage <= cap + LEAKAGE_TOL:
        return point.rate
    return -INFEASIBLE_PENALTY - (point.leakage - cap)


def optimize_region(
    instance: MaskingInstance,
    objective: str = "ea",
    family: str = "product",
    leakage_grid: Optional[Sequence[float]] = None,
    restarts: int = 8,
    max_evals: int = 5000,
    seed: int = 0,
    family_options: Optional[Dict] = None,
) -> Frontier:
    """
    Maximise a rate objective over a candidate family.

    Leakage-constrained objectives (``*_capacity_leakage``) run once per
    value of ``leakage_grid`` in increasing order, each warm-started from the
    previous optimum so raw rates never decrease; the returned points are the
    running maximum. Other objectives yield a single point. Restart 0 (and 1
    for families with two canonical members) start from canonical members,
    the rest from seeded random parameters.
    """
    if restarts < 1:
        raise ConfigurationError(f"restarts must be >= 1, got {restarts}")
    constrained = objective.endswith("capacity_leakage")
    fam = make_family(instance, family, **(family_options or {}))
    rate_of = _rate_function(fam.instance, objective)
    h_c = fam.instance.h_c() / fam.instance.letters
    caps: List[Optional[float]] = [None]
    if constrained:
        if not leakage_grid:
            raise ConfigurationError(f"{objective} needs a leakage grid")
        caps = sorted(float(x) for x in leakage_grid)
    search = PatternSearch(max_evals=max_evals)
    randoms = [
        fam.random_params(make_rng(child))
        for child in spawn_seeds(seed, restarts)[len(fam.canonical) :]
    ]

    def value(params: np.ndarray, cap: Optional[float]) -> float:
        return _score(rate_of(fam.build(params)), cap)

    best_params: Optional[np.ndarray] = None
    points: List[RateLeakagePoint] = []
    raw_rates: List[float] = []
    exhausted_any = False
    for index, cap in enumerate(caps):
        warm = [] if best_params is None else [best_params]
        starts = warm + list(fam.canonical) + randoms
        results = ordered_map(
            lambda x0, cap=cap: search.maximize(lambda x: value(x, cap), x0), starts
        )
        winner = max(range(len(results)), key=lambda i: (results[i].value, -i))
        result = results[winner]
        exhausted = any(r.budget_exhausted for r in results)
        exhausted_any = exhausted_any or exhausted
        best_params = result.x
        point = rate_of(fam.build(result.x))
        feasible = _score(point, cap) == point.rate
        if not feasible:
            point = point.model_copy(update={"rate": 0.0})
        raw_rates.append(point.rate)
        flag = point.flag
        if exhausted:
            flag = "budget"
            logger.warning(
                "Optimiser budget of %d evaluations exhausted at leakage cap %s",
                max_evals,
                cap,
            )
        if cap is not None and cap > 2 * h_c + LEAKAGE_TOL:
            flag = "trivially satisfiable"
        if points and points[-1].rate > point.rate:
            point = points[-1].model_copy()
        points.append(point.model_copy(update={"flag": flag, "leakage_cap": cap}))
        logger.info(
            "Frontier point %d: rate %.6f at leakage cap %s (restart %d)",
            index,
            point.rate,
            cap,
            winner,
        )
    return Frontier(
        objective=objective,
        family=family,
        points=points,
        raw_rates=raw_rates,
        budget_exhausted=exhausted_any,
        restarts=restarts,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def _closed_point(
    rate_kind: str,
    rate: float,
    leakage: float,
    icoh: float,
    family: str,
    lam: float,
    flag: str,
) -> RateLeakagePoint:
    return RateLeakagePoint(
        family=family,
        params=[lam],
        rate_kind=rate_kind,
        rate=max(0.0, rate),
        leakage=max(0.0, leakage),
        terms=EntropyTerms(
            h_a_given_ec=1.0, icoh=icoh, i_c_ab=max(0.0, leakage), i_a_ec=0.0
        ),
        aux_dim=2,
        flag=flag,
    )


def dephasing_closed_form(
    spec: DephasingSpec, lambdas: Sequence[float]
) -> DephasingFrontiers:
    """
    R0, R1 and quantum frontiers of the dephasing pair.

    For each lambda: R0 = (2 - h2(lambda*eps_bar), h2(lambda*eps_bar)
    - (1-q) h2(lambda*eps0) - q h2(lambda*eps1)); R1 replaces eps_bar by
    eps_hat; the quantum rate is 1 - h2(lambda*eps_hat) at R1's leakage.
    Values outside eps0 <= 1/2 <= eps1 are still computed but flagged.
    """
    flag = "ok" if spec.in_regime else "outside regime"
    if not spec.in_regime:
        logger.warning(
            "Dephasing closed form outside its regime (eps0=%.3g, eps1=%.3g)",
            spec.eps0,
            spec.eps1,
        )
    r0, r1, quantum = [], [], []
    for lam in lambdas:
        base = (1 - spec.q) * h2(star(lam, spec.eps0))
        base += spec.q * h2(star(lam, spec.eps1))
        bar = h2(star(lam, spec.eps_bar))
        hat = h2(star(lam, spec.eps_hat))
        point = functools.partial(_closed_point, lam=lam, flag=flag)
        r0.append(point("R", 2 - bar, bar - base, 1 - bar, "closed R0"))
        r1.append(point("R", 2 - hat, hat - base, 1 - hat, "closed R1"))
        quantum.append(point("Q", 1 - hat, hat - base, 1 - hat, "closed quantum"))
    return DephasingFrontiers(
        q=spec.q,
        eps0=spec.eps0,
        eps1=spec.eps1,
        eps_bar=spec.eps_bar,
        eps_hat=spec.eps_hat,
        lambdas=list(lambdas),
        r0=r0,
        r1=r1,
        quantum=quantum,
        in_regime=spec.in_regime,
    )


def erasure_reference(eps: float) -> Dict[str, float]:
    """Closed-form quantum capacities of the qubit erasure channel."""
    if not 0.0 <= eps <= 1.0:
        raise ConfigurationError(f"erasure probability {eps} outside [0, 1]")
    return {"ea": 1.0 - eps, "unassisted": max(0.0, 1.0 - 2.0 * eps)}
