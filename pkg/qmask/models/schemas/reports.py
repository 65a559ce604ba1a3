"""Result schemas emitted by the services and serialised by the CLI."""
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field

ACHIEVABLE = "achievable lower bound"
OUTER_EVALUATION = "per-candidate upper-bound evaluation"
INNER_ONLY = "inner bound only"


class EntropyTerms(BaseModel):
    """Entropic quantities a rate-leakage point was computed from (bits)."""

    h_a_given_ec: float = Field(..., description="H(A|EC) on the input candidate")
    icoh: float = Field(..., description="I(A>B) on the channel output")
    i_c_ab: float = Field(..., description="I(C;AB) on the channel output")
    i_ab: Optional[float] = None
    i_a_ec: Optional[float] = None
    h_a_given_ck: Optional[float] = None
    h_c: float = 0.0


class RateLeakagePoint(BaseModel):
    """One (Q or R, L, optional R_e) point with the entropies behind it."""

    family: str = "explicit"
    params: List[float] = []
    rate_kind: Literal["Q", "R"] = "Q"
    rate: float = Field(..., ge=0)
    leakage: float = Field(..., ge=0)
    entanglement_rate: Optional[float] = Field(None, ge=0)
    terms: EntropyTerms
    aux_dim: int = 1
    letters: int = 1
    bound: str = ACHIEVABLE
    flag: str = "ok"
    leakage_cap: Optional[float] = None


class RateLimitedRegion(BaseModel):
    """Constraints Q + R_e <= H(A|EC), Q - R_e <= I(A>B), L >= I(C;AB)."""

    h_a_given_ec: float
    icoh: float
    leakage_floor: float
    corners: List[RateLeakagePoint]

    def max_rate(self, entanglement_rate: float) -> float:
        """Largest Q allowed at a given R_e."""
        return max(
            0.0,
            min(
                self.h_a_given_ec - entanglement_rate,
                self.icoh + entanglement_rate,
            ),
        )


class Frontier(BaseModel):
    """Optimised frontier over a leakage grid."""

    objective: str
    family: str
    points: List[RateLeakagePoint]
    raw_rates: List[float] = []
    budget_exhausted: bool = False
    restarts: int = 1
    seed: int = 0


class DephasingFrontiers(BaseModel):
    """Closed-form R0, R1 and quantum frontiers of the dephasing example."""

    q: float
    eps0: float
    eps1: float
    eps_bar: float
    eps_hat: float
    lambdas: List[float]
    r0: List[RateLeakagePoint]
    r1: List[RateLeakagePoint]
    quantum: List[RateLeakagePoint]
    in_regime: bool = True


class DecouplingRow(BaseModel):
    """Monte Carlo estimate for one blocklength."""

    n: int
    samples: int
    mean: float = Field(..., ge=0)
    std: float = Field(..., ge=0)
    stderr: float = Field(..., ge=0)
    mean_shared: float = Field(..., ge=0)
    std_shared: float = Field(..., ge=0)
    stderr_shared: float = Field(..., ge=0)
    rhs: float
    rhs_shared: float
    sensitivity: float
    sensitivity_shared: float
    vacuous: bool
    vacuous_shared: bool
    passed: bool
    passed_shared: bool


class DecouplingReport(BaseModel):
    """Per-blocklength empirical averages against the decoupling bounds."""

    dim_s: int
    dim_g: int
    h_a_given_k: float
    epsilon: float
    seed: int
    rows: List[DecouplingRow]

    @property
    def passed(self) -> bool:
        return all(row.passed and row.passed_shared for row in self.rows)


class OneShotResult(BaseModel):
    value: float
    hmin_zeta: float
    hmin_rho: float
    flag: str = "unsmoothed surrogate"


class ClassCheckReport(BaseModel):
    """Outcome of a sampled structural check."""

    check: str
    trials: int
    violations: int = 0
    worst_margin: float = 0.0
    worst_residual: float = 0.0
    statement: str = ""
    caveat: str = ""


class MessageDiagnostic(BaseModel):
    label: str
    error: float
    leakage: float


class CodeReport(BaseModel):
    """Error and leakage of an explicit code over a tested message set."""

    n: int
    error: float = Field(..., ge=0, le=1 + 1e-9)
    leakage: float = Field(..., ge=0)
    leakage_ceiling: float
    label: str = "max over tested messages"
    messages: List[MessageDiagnostic] = []
    extras: Dict[str, float] = {}


class CodingExponents(BaseModel):
    """Random-coding diagnostics for a candidate at rates (Q, R_e)."""

    n: int
    delta1: float
    delta2: float
    error_bound: float
    leakage_excess: float
