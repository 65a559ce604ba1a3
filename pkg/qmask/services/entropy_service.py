"""
Entropic functionals, all in bits.

Conditional quantities are built from plain von Neumann entropies of
reduced states; the min-entropy is a certified lower bound obtained by
maximising over test states sigma_B.
"""
import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from qmask.core.config import get_settings
from qmask.core.linalg import (
    SeedLike,
    clipped_spectrum,
    inverse_sqrt,
    make_rng,
    matrix_sqrt,
    trace_norm,
)
from qmask.exceptions import (
    ConditioningError,
    ConfigurationError,
    DomainError,
    LabelError,
    QueryError,
)
from qmask.models.quantum import DensityOperator, PureState
from qmask.services.optimizer import PatternSearch
from qmask.utils.parallel import ordered_map

logger = logging.getLogger(__name__)

StateLike = Union[DensityOperator, PureState]


def _density(state: StateLike) -> DensityOperator:
    return state.density() if isinstance(state, PureState) else state


def spectrum_entropy(evals: np.ndarray) -> float:
    """-sum p log2 p over eigenvalues with 0 log 0 = 0."""
    clip = get_settings().ENTROPY_CLIP
    p = evals[evals >= clip]
    if p.size == 0:
        return 0.0
    return float(max(0.0, -np.sum(p * np.log2(p))))


def von_neumann(rho: StateLike) -> float:
    """H(rho) in bits; eigenvalues in [-1e-9, 1e-12) count as zero."""
    rho = _density(rho)
    evals, _ = clipped_spectrum(rho.matrix)
    return spectrum_entropy(evals)


def entropy_of(rho: StateLike, labels: Iterable[str]) -> float:
    """H of the reduced state on ``labels``; the empty set has entropy 0."""
    labels = list(labels)
    if not labels:
        return 0.0
    return von_neumann(_density(rho).reduce(labels))


def conditional_entropy(rho: StateLike, a: Iterable[str], b: Iterable[str]) -> float:
    """H(A|B) = H(AB) - H(B)."""
    a, b = list(a), list(b)
    return entropy_of(rho, a + b) - entropy_of(rho, b)


@dataclass(frozen=True)
class EntropyQuery:
    """A state and up to three disjoint label groups (A, B, C)."""

    state: DensityOperator
    a: Tuple[str, ...]
    b: Tuple[str, ...] = ()
    c: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "state", _density(self.state))
        for name in ("a", "b", "c"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        groups = [set(self.a), set(self.b), set(self.c)]
        a, b, c = groups
        if (a & b) or (a & c) or (b & c):
            raise QueryError("groups must be disjoint")
        unknown = (groups[0] | groups[1] | groups[2]) - set(self.state.labels)
        if unknown:
            raise LabelError(f"unknown labels {sorted(unknown)}", self.state.labels)


def _mutual(rho: DensityOperator, a: List[str], b: List[str], c: List[str]) -> float:
    if not a or not b:
        return 0.0
    return (
        entropy_of(rho, a + c)
        + entropy_of(rho, b + c)
        - entropy_of(rho, a + b + c)
        - entropy_of(rho, c)
    )


def mutual_information(q: EntropyQuery) -> float:
    """
    I(A;B) = H(A) + H(B) - H(AB), or I(A;B|C) when the C-group is set.

    Raises:
        QueryError: if the A- or B-group is empty
    """
    if not q.a or not q.b:
        raise QueryError("mutual information needs nonempty A and B groups")
    return _mutual(q.state, list(q.a), list(q.b), list(q.c))


def conditional_mutual_information(
    rho: StateLike, a: Iterable[str], b: Iterable[str], c: Iterable[str] = ()
) -> float:
    """I(A;B|C); zero whenever A or B is empty."""
    return _mutual(_density(rho), list(a), list(b), list(c))


def coherent_information(q: EntropyQuery) -> float:
    """I(A>B) = H(B) - H(AB); the C-group, when set, joins the B side."""
    if not q.a or not q.b:
        raise QueryError("coherent information needs nonempty A and B groups")
    side = list(q.b) + list(q.c)
    return entropy_of(q.state, side) - entropy_of(q.state, list(q.a) + side)


# ---------------------------------------------------------------------------
# Binary entropy
# ---------------------------------------------------------------------------


def _check_unit(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise DomainError(name, value, 0.0, 1.0)


def h2(x: float) -> float:
    """Binary entropy in bits."""
    _check_unit("x", x)
    if x in (0.0, 1.0):
        return 0.0
    return float(-x * math.log2(x) - (1 - x) * math.log2(1 - x))


def star(a: float, b: float) -> float:
    """Binary convolution a*b = (1-a) b + a (1-b)."""
    _check_unit("a", a)
    _check_unit("b", b)
    return (1 - a) * b + a * (1 - b)


def binary_entropy_star(x: float, a: float, b: float) -> Tuple[float, float]:
    """(h2(x), a*b)."""
    return h2(x), star(a, b)


# ---------------------------------------------------------------------------
# Conditional min-entropy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MinEntropyResult:
    """Best lower bound on H_min(A|B) and the sigma_B achieving it."""

    value: float
    sigma: np.ndarray
    source: str
    label: str = "lower bound"


def _split(
    rho: DensityOperator, b_labels: Sequence[str]
) -> Tuple[List[str], DensityOperator]:
    b_labels = list(b_labels)
    rho.shape.check_labels(b_labels)
    a_labels = [lab for lab in rho.labels if lab not in b_labels]
    return a_labels, rho.permute(a_labels + b_labels)


def _min_entropy_matrix(rho_ab: np.ndarray, d_a: int, sigma: np.ndarray) -> float:
    s = inverse_sqrt(sigma)
    w = np.kron(np.eye(d_a), s)
    lam = float(np.linalg.eigvalsh(w @ rho_ab @ w.conj().T)[-1])
    return -math.log2(lam)


def min_entropy_fixed(
    rho_ab: DensityOperator,
    sigma_b: DensityOperator,
    b_labels: Optional[Sequence[str]] = None,
) -> float:
    """
    H_min(rho_AB | sigma_B) = -log2 lambda_max(S rho S) with S = I (x) sigma^-1/2.

    B is given by ``b_labels`` or, by default, by sigma_B's labels.

    Raises:
        ConditioningError: if sigma_B has an eigenvalue <= 1e-9
    """
    b_labels = list(b_labels or sigma_b.labels)
    a_labels, ordered = _split(rho_ab, b_labels)
    sigma = sigma_b.permute(b_labels).matrix
    smallest = float(np.linalg.eigvalsh((sigma + sigma.conj().T) / 2)[0])
    if smallest <= 1e-9:
        raise ConditioningError(smallest)
    d_a = rho_ab.shape.dim_of(a_labels)
    return _min_entropy_matrix(ordered.matrix, d_a, sigma)


def _sigma_from_params(x: np.ndarray, d: int) -> np.ndarray:
    g = (x[: d * d] + 1j * x[d * d :]).reshape(d, d)
    s = g @ g.conj().T + 1e-9 * np.eye(d)
    return s / np.trace(s).real


def _params_from_sigma(sigma: np.ndarray) -> np.ndarray:
    g = matrix_sqrt(sigma).reshape(-1)
    return np.concatenate([g.real, g.imag])


def min_entropy(
    rho_ab: DensityOperator,
    b_labels: Sequence[str],
    restarts: int = 4,
    seed: SeedLike = 0,
    max_evals: int = 2000,
) -> MinEntropyResult:
    """
    Certified lower bound on H_min(A|B).

    Candidates: rho_B, the maximally mixed state, the diagonal guess
    sigma(b) proportional to max_a <ab|rho|ab> (optimal for classical states),
    then pattern-search refinements from ``restarts`` starts (the first seeded
    at the best candidate). Every value is an H_min(rho|sigma) for an actual
    sigma, so the result never exceeds the true min-entropy.
    """
    if restarts < 1:
        raise ConfigurationError(f"restarts must be >= 1, got {restarts}")
    a_labels, ordered = _split(rho_ab, b_labels)
    d_a = rho_ab.shape.dim_of(a_labels)
    d_b = rho_ab.shape.dim_of(b_labels)
    m = ordered.matrix

    candidates = [("maximally mixed", np.eye(d_b, dtype=complex) / d_b)]
    rho_b = ordered.reduce(list(b_labels)).matrix
    if np.linalg.eigvalsh(rho_b)[0] > 1e-9:
        candidates.append(("rho_B", rho_b))
    diag = np.real(np.diag(m)).reshape(d_a, d_b).max(axis=0)
    if np.all(diag > 1e-9):
        guess = np.diag(diag / diag.sum()).astype(complex)
        candidates.append(("diagonal guess", guess))

    best_source, best_sigma = candidates[0]
    best_value = _min_entropy_matrix(m, d_a, best_sigma)
    for source, sigma in candidates[1:]:
        value = _min_entropy_matrix(m, d_a, sigma)
        if value > best_value:
            best_source, best_sigma, best_value = source, sigma, value

    def objective(x: np.ndarray) -> float:
        return _min_entropy_matrix(m, d_a, _sigma_from_params(x, d_b))

    seeds = np.random.SeedSequence(_entropy_seed(seed)).spawn(restarts)
    starts = [_params_from_sigma(best_sigma)]
    for child in seeds[1:]:
        starts.append(make_rng(child).standard_normal(2 * d_b * d_b))
    search = PatternSearch(max_evals=max_evals, floor=1e-6)

    results = ordered_map(lambda x0: search.maximize(objective, x0), starts)

    for i, result in enumerate(results):
        if result.value > best_value:
            best_value = result.value
            best_sigma = _sigma_from_params(result.x, d_b)
            best_source = f"refinement {i}"

    low, high = -math.log2(d_b), math.log2(d_a)
    value = min(max(best_value, low), high)
    logger.debug("H_min lower bound %.6f from %s", value, best_source)
    return MinEntropyResult(value=value, sigma=best_sigma, source=best_source)


def _entropy_seed(seed: SeedLike) -> int:
    if isinstance(seed, np.random.Generator):
        return int(seed.integers(0, 2**63))
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.generate_state(1)[0])
    return 0 if seed is None else int(seed)


# ---------------------------------------------------------------------------
# Identities and continuity
# ---------------------------------------------------------------------------


def csiszar_sum_check(
    rho: StateLike, a_labels: Sequence[str], b_labels: Sequence[str]
) -> float:
    """
    |sum_i I(A_{i+1}^n; B_i | B^{i-1}) - sum_i I(B^{i-1}; A_i | A_{i+1}^n)|.

    ``a_labels[i]`` and ``b_labels[i]`` name the i-th letters.
    """
    a, b = list(a_labels), list(b_labels)
    if len(a) != len(b) or not a:
        raise QueryError("need n >= 1 letters on both sides")
    rho = _density(rho)
    n = len(a)
    left = sum(
        conditional_mutual_information(rho, a[i + 1 :], [b[i]], b[:i]) for i in range(n)
    )
    right = sum(
        conditional_mutual_information(rho, b[:i], [a[i]], a[i + 1 :]) for i in range(n)
    )
    return abs(left - right)


@dataclass(frozen=True)
class ContinuityCheck:
    lhs: float
    rhs: float
    distance: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 1e-12


def afw_bound(
    rho: StateLike, sigma: StateLike, c_labels: Sequence[str], bg_labels: Sequence[str]
) -> ContinuityCheck:
    """
    Continuity of I(C;BG) between two states.

    lhs = |I(C;BG)_rho - I(C;BG)_sigma| and
    rhs = 4 log2(d) sqrt(delta) + 2 (1 + sqrt(delta))
    with delta = ||rho - sigma||_1 and d the smaller of the two sides' dimensions.
    """
    rho, sigma = _density(rho), _density(sigma)
    if rho.shape != sigma.shape:
        raise LabelError("states must share a shape", rho.labels)
    c, bg = list(c_labels), list(bg_labels)
    lhs = abs(_mutual(rho, c, bg, []) - _mutual(sigma, c, bg, []))
    delta = trace_norm(rho.matrix - sigma.matrix)
    d = min(rho.shape.dim_of(c), rho.shape.dim_of(bg))
    root = math.sqrt(delta)
    rhs = 4 * math.log2(d) * root + 2 * (1 + root)
    return ContinuityCheck(lhs=lhs, rhs=rhs, distance=delta)
