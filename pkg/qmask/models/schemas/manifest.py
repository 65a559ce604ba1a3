"""Run manifest schemas: one parameter model per command, unknown fields rejected."""
from typing import Annotated, Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator

from qmask.models.schemas.documents import ChannelDocument, ComplexPair, StateDocument

SEED_MAX = 2**64 - 1
STOCHASTIC_COMMANDS = ("region", "decouple", "classcheck")


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ---------------------------------------------------------------------------
# Channels and instances
# ---------------------------------------------------------------------------


class ChannelSpec(StrictModel):
    """A single-use channel A' -> B, either from the zoo or as a Kraus list."""

    kind: Literal["phase_flip", "erasure", "depolarizing", "identity", "kraus"]
    eps: float = Field(default=0.0, ge=0, le=1)
    kraus: Optional[ChannelDocument] = None

    @model_validator(mode="after")
    def check_kraus(self) -> "ChannelSpec":
        if (self.kind == "kraus") != (self.kraus is not None):
            raise ValueError("'kraus' is required for kind 'kraus' and only then")
        return self


class DephasingInstance(StrictModel):
    kind: Literal["dephasing"]
    q: float = Field(..., ge=0, le=0.5)
    eps0: float = Field(..., ge=0, le=1)
    eps1: float = Field(..., ge=0, le=1)


class StatelessInstance(StrictModel):
    kind: Literal["stateless"]
    channel: ChannelSpec


class HadamardInstance(StrictModel):
    """
    A Hadamard channel: dephasing when ``eps`` is set, explicit vectors when
    ``zeta``, ``eta`` and ``psi`` are given, a random spec otherwise.

    Vectors are lists of [re, im] pairs; zeta lives on (E, A'), eta on (C1, K)
    and psi lists the basis vectors of B.
    """

    kind: Literal["hadamard"]
    eps: Optional[float] = Field(default=None, ge=0, le=1)
    dim_e: int = Field(default=1, ge=1)
    dim_a_prime: int = Field(default=2, ge=1)
    dim_c1: int = Field(default=1, ge=1)
    dim_k: int = Field(default=2, ge=1)
    spec_seed: int = Field(default=0, ge=0, le=SEED_MAX)
    zeta: Optional[List[List[ComplexPair]]] = Field(default=None, min_length=1)
    eta: Optional[List[List[ComplexPair]]] = Field(default=None, min_length=1)
    psi: Optional[List[List[ComplexPair]]] = Field(default=None, min_length=1)

    @property
    def has_vectors(self) -> bool:
        return self.zeta is not None

    @model_validator(mode="after")
    def check_vectors(self) -> "HadamardInstance":
        given = [v is not None for v in (self.zeta, self.eta, self.psi)]
        if any(given) and not all(given):
            raise ValueError("give all of 'zeta', 'eta' and 'psi' or none")
        if self.zeta is None or self.eta is None or self.psi is None:
            return self
        if self.eps is not None:
            raise ValueError("'eps' and explicit vectors exclude each other")
        sizes = {
            "zeta": (self.zeta, self.dim_e * self.dim_a_prime),
            "eta": (self.eta, self.dim_c1 * self.dim_k),
            "psi": (self.psi, len(self.psi)),
        }
        for name, (vectors, size) in sizes.items():
            if any(len(v) != size for v in vectors):
                raise ValueError(f"every '{name}' vector needs {size} entries")
        return self


class CustomInstance(StrictModel):
    """Arbitrary channel over (E, A') -> B with its channel-state triple."""

    kind: Literal["custom"]
    channel: ChannelDocument
    state: StateDocument
    e_labels: List[str] = ["E"]
    e0_labels: List[str] = ["E0"]
    c_labels: List[str] = ["C"]


InstanceSpec = Annotated[
    Union[DephasingInstance, StatelessInstance, HadamardInstance, CustomInstance],
    Field(discriminator="kind"),
]


# ---------------------------------------------------------------------------
# Command parameters
# ---------------------------------------------------------------------------


class EntropyQuerySpec(StrictModel):
    quantity: Literal[
        "entropy",
        "conditional_entropy",
        "mutual_information",
        "coherent_information",
        "min_entropy",
    ]
    a: List[str] = Field(..., min_length=1)
    b: List[str] = []
    c: List[str] = []


class EntropyParams(StrictModel):
    """Entropic quantities of one state, given explicitly or as Phi_D."""

    state: Optional[StateDocument] = None
    maximally_entangled_dim: Optional[int] = Field(default=None, ge=1)
    queries: List[EntropyQuerySpec] = Field(..., min_length=1)

    @model_validator(mode="after")
    def check_state(self) -> "EntropyParams":
        if (self.state is None) == (self.maximally_entangled_dim is None):
            raise ValueError(
                "give exactly one of 'state' and 'maximally_entangled_dim'"
            )
        return self


class RegionParams(StrictModel):
    instance: InstanceSpec
    objective: Literal[
        "ea",
        "ea_classical",
        "unassisted_inner",
        "hadamard_outer",
        "ea_capacity_leakage",
        "ea_classical_capacity_leakage",
    ] = "ea"
    family: Literal["controlled", "product", "free"] = "product"
    leakage_grid: Optional[List[float]] = None
    letters: Literal[1, 2] = 1
    restarts: int = Field(default=8, ge=1)
    max_evals: int = Field(default=5000, ge=1)
    family_options: Dict[str, Any] = {}


class DecoupleParams(StrictModel):
    """omega_ABK comes from the Stinespring dilation of ``channel`` on Phi_AA'."""

    channel: ChannelSpec = ChannelSpec(kind="phase_flip", eps=0.02)
    dim_s: int = Field(default=1, ge=1)
    dim_g: int = Field(default=1, ge=1)
    blocklengths: List[int] = Field(default=[1, 2, 3], min_length=1)
    samples: int = Field(default=200, ge=1)
    epsilon: float = Field(default=0.0, ge=0)


class DephasingParams(StrictModel):
    q: float = Field(..., ge=0, le=0.5)
    eps0: float = Field(..., ge=0, le=1)
    eps1: float = Field(..., ge=0, le=1)
    lambda_grid: List[float] = Field(
        default=[i / 20 for i in range(11)], min_length=1
    )
    evaluate: bool = True


class ClassCheckParams(StrictModel):
    check: Literal["less_noisy", "less_noisy_swap", "degradable", "hadamard_L"]
    instance: InstanceSpec
    trials: int = Field(default=50, ge=1)
    dim_a: int = Field(default=2, ge=1)
    coherent: bool = False

    @model_validator(mode="after")
    def check_instance(self) -> "ClassCheckParams":
        needs_hadamard = self.check in ("degradable", "hadamard_L")
        if needs_hadamard and self.instance.kind != "hadamard":
            raise ValueError(f"check '{self.check}' needs a hadamard instance")
        return self


class CodeParams(StrictModel):
    """
    A reference protocol, or a ``custom`` code given by its encoder, decoder
    and optional entangled state. Custom codes run over ``instance``, or over
    ``channel`` without channel state when no instance is given.
    """

    protocol: Literal[
        "trivial", "superdense", "preflip_superdense", "teleportation", "custom"
    ]
    instance: Optional[InstanceSpec] = None
    channel: Optional[ChannelSpec] = None
    messages: Literal["default", "basis"] = "default"
    constant_decoder: bool = False
    message_state: Optional[StateDocument] = None
    blocklength: int = Field(default=1, ge=1)
    encoder: Optional[ChannelDocument] = None
    decoder: Optional[ChannelDocument] = None
    entangled_state: Optional[StateDocument] = None

    @model_validator(mode="after")
    def check_protocol(self) -> "CodeParams":
        if self.protocol in ("trivial", "preflip_superdense") and self.instance is None:
            raise ValueError(f"protocol '{self.protocol}' needs an instance")
        custom_fields = (self.encoder, self.decoder, self.entangled_state)
        if self.protocol != "custom":
            if any(f is not None for f in custom_fields) or self.blocklength != 1:
                raise ValueError(
                    "'encoder', 'decoder', 'entangled_state' and "
                    "'blocklength' belong to protocol 'custom'"
                )
            return self
        if self.encoder is None or self.decoder is None:
            raise ValueError("protocol 'custom' needs 'encoder' and 'decoder'")
        if self.instance is not None and self.channel is not None:
            raise ValueError("give at most one of 'instance' and 'channel'")
        if self.entangled_state is not None and self.entangled_state.kind != "pure":
            raise ValueError("'entangled_state' must be a pure state")
        return self


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------


class ManifestBase(StrictModel):
    seed: Optional[int] = Field(default=None, ge=0, le=SEED_MAX)
    out: Optional[str] = None
    description: str = ""

    @model_validator(mode="after")
    def check_seed(self) -> "ManifestBase":
        command = getattr(self, "command")
        if command in STOCHASTIC_COMMANDS and self.seed is None:
            raise ValueError(f"command '{command}' needs a seed")
        return self


class EntropyManifest(ManifestBase):
    command: Literal["entropy"]
    params: EntropyParams


class RegionManifest(ManifestBase):
    command: Literal["region"]
    params: RegionParams


class DecoupleManifest(ManifestBase):
    command: Literal["decouple"]
    params: DecoupleParams


class DephasingManifest(ManifestBase):
    command: Literal["dephasing"]
    params: DephasingParams


class ClassCheckManifest(ManifestBase):
    command: Literal["classcheck"]
    params: ClassCheckParams


class CodeManifest(ManifestBase):
    command: Literal["code"]
    params: CodeParams


RunManifest = Annotated[
    Union[
        EntropyManifest,
        RegionManifest,
        DecoupleManifest,
        DephasingManifest,
        ClassCheckManifest,
        CodeManifest,
    ],
    Field(discriminator="command"),
]

COMMANDS = ("entropy", "region", "decouple", "dephasing", "classcheck", "code")

manifest_adapter: TypeAdapter = TypeAdapter(RunManifest)
