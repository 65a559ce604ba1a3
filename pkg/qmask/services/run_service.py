"""
Manifest execution: build instances from their specs and run one command.

Each command returns a ``RunResult`` holding the CSV frame, the JSON
payload and the fields of the CSV header line. Writing is left to the CLI.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from qmask.core.linalg import SubsystemShape
from qmask.exceptions import QueryError, SpecError
from qmask.models.quantum import (
    A,
    A_PRIME,
    B,
    C1,
    E,
    K,
    M,
    ChannelStateTriple,
    DensityOperator,
    KrausChannel,
    PureState,
)
from qmask.models.schemas.manifest import (
    ChannelSpec,
    ClassCheckParams,
    CodeParams,
    DecoupleParams,
    DephasingParams,
    EntropyParams,
    HadamardInstance,
    RegionParams,
)
from qmask.services import entropy_service as entropy
from qmask.services.decoupling_service import (
    DecouplingConfig,
    channel_omega,
    run_iid_decoupling,
)
from qmask.services.export_service import to_frame
from qmask.services.harness_service import (
    CodeSpec,
    basis_messages,
    constant_decoder,
    default_messages,
    evaluate_code,
    preflip_superdense_code,
    superdense_code,
    teleportation,
    trivial_code,
)
from qmask.services.quantum_service import (
    depolarizing_channel,
    identity_channel,
    maximally_correlated,
    maximally_entangled,
    stinespring,
    trivial_triple,
)
from qmask.services.region_service import (
    MaskingInstance,
    dephasing_candidate,
    dephasing_closed_form,
    erasure_reference,
    eval_ea_point,
    eval_unassisted_inner,
    optimize_region,
    power_instance,
)
from qmask.services.zoo_service import (
    DephasingSpec,
    HadamardSpec,
    check_degradable,
    check_less_noisy,
    dephasing_channel,
    dephasing_hadamard_spec,
    erasure_channel,
    hadamard_channel,
    hadamard_L_check,
    hadamard_spec_from_vectors,
    measure_prepare_degrader,
    phase_flip_channel,
    random_hadamard_spec,
    stateless,
)

logger = logging.getLogger(__name__)

REGION_COLUMNS = [
    "family",
    "params",
    "Q_or_R",
    "L",
    "R_e",
    "H_A_given_EC",
    "Icoh",
    "I_C_AB",
    "leakage_cap",
    "bound",
    "flag",
]


@dataclass
class RunResult:
    frame: pd.DataFrame
    payload: Dict[str, Any]
    header: Dict[str, Any] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def build_channel(spec: ChannelSpec) -> KrausChannel:
    """The single-use channel A' -> B named by ``spec``."""
    if spec.kind == "phase_flip":
        return phase_flip_channel(spec.eps)
    if spec.kind == "erasure":
        return erasure_channel(spec.eps)
    if spec.kind == "depolarizing":
        return depolarizing_channel(spec.eps, 2, A_PRIME, B)
    if spec.kind == "identity":
        return identity_channel(SubsystemShape.of((A_PRIME, 2)), [B])
    return spec.kraus.to_channel()


def _complex_vectors(
    vectors: Optional[List[List[Tuple[float, float]]]]
) -> List[List[complex]]:
    return [[complex(re, im) for re, im in v] for v in vectors or []]


def build_hadamard_spec(spec: HadamardInstance) -> HadamardSpec:
    if spec.eps is not None:
        return dephasing_hadamard_spec(spec.eps)
    if spec.has_vectors:
        return hadamard_spec_from_vectors(
            _complex_vectors(spec.zeta),
            _complex_vectors(spec.eta),
            _complex_vectors(spec.psi),
            SubsystemShape.of((E, spec.dim_e), (A_PRIME, spec.dim_a_prime)),
            SubsystemShape.of((C1, spec.dim_c1), (K, spec.dim_k)),
        )
    return random_hadamard_spec(
        spec.dim_e, spec.dim_a_prime, spec.dim_c1, spec.dim_k, seed=spec.spec_seed
    )


def _uniform_triple(dim_e: int) -> ChannelStateTriple:
    if dim_e == 1:
        return trivial_triple()
    return maximally_correlated(np.full(dim_e, 1.0 / dim_e))


def build_instance(spec: Any) -> MaskingInstance:
    """
    A ``MaskingInstance`` for any instance spec; the dilation is always set
    so that outer bounds and class checks can use it.
    """
    if spec.kind == "dephasing":
        channel, triple = dephasing_channel(
            DephasingSpec(q=spec.q, eps0=spec.eps0, eps1=spec.eps1)
        )
        return MaskingInstance(channel, triple, stinespring(channel))
    if spec.kind == "stateless":
        channel, triple = stateless(build_channel(spec.channel))
        return MaskingInstance(channel, triple, stinespring(channel))
    if spec.kind == "hadamard":
        hspec = build_hadamard_spec(spec)
        channel, dilation = hadamard_channel(hspec)
        triple = _uniform_triple(hspec.in_shape.dim_of([E]))
        return MaskingInstance(channel, triple, dilation)
    channel = spec.channel.to_channel()
    state = spec.state.to_state()
    triple = ChannelStateTriple(
        state.density() if isinstance(state, PureState) else state,
        e_labels=tuple(spec.e_labels),
        e0_labels=tuple(spec.e0_labels),
        c_labels=tuple(spec.c_labels),
    )
    return MaskingInstance(channel, triple, stinespring(channel))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _entropy_state(params: EntropyParams) -> DensityOperator:
    if params.maximally_entangled_dim is not None:
        return maximally_entangled(params.maximally_entangled_dim, (A, B)).density()
    state = params.state.to_state()
    return state.density() if isinstance(state, PureState) else state


def run_entropy(params: EntropyParams, seed: int) -> RunResult:
    rho = _entropy_state(params)
    rows = []
    for query in params.queries:
        a, b, c = query.a, query.b, query.c
        flag = "exact"
        if query.quantity == "entropy":
            value = entropy.entropy_of(rho, a)
        elif query.quantity == "conditional_entropy":
            value = entropy.conditional_entropy(rho, a, b)
        elif query.quantity == "mutual_information":
            value = entropy.mutual_information(entropy.EntropyQuery(rho, a, b, c))
        elif query.quantity == "coherent_information":
            value = entropy.coherent_information(entropy.EntropyQuery(rho, a, b, c))
        else:
            if not b:
                raise QueryError("min_entropy needs a conditioning group b")
            result = entropy.min_entropy(rho.reduce(a + b), b, seed=seed)
            value, flag = result.value, result.label
        rows.append(
            {
                "quantity": query.quantity,
                "a": a,
                "b": b,
                "c": c,
                "value": value,
                "flag": flag,
            }
        )
    frame = to_frame(rows, ["quantity", "a", "b", "c", "value", "flag"])
    return RunResult(frame, {"rows": rows}, {"seed": seed})


def _region_row(point) -> Dict[str, Any]:
    return {
        "family": point.family,
        "params": point.params,
        "Q_or_R": point.rate,
        "L": point.leakage,
        "R_e": point.entanglement_rate,
        "H_A_given_EC": point.terms.h_a_given_ec,
        "Icoh": point.terms.icoh,
        "I_C_AB": point.terms.i_c_ab,
        "leakage_cap": point.leakage_cap,
        "bound": point.bound,
        "flag": point.flag,
    }


def run_region(params: RegionParams, seed: int) -> RunResult:
    instance = power_instance(build_instance(params.instance), params.letters)
    frontier = optimize_region(
        instance,
        objective=params.objective,
        family=params.family,
        leakage_grid=params.leakage_grid,
        restarts=params.restarts,
        max_evals=params.max_evals,
        seed=seed,
        family_options=params.family_options,
    )
    payload: Dict[str, Any] = {"frontier": frontier.model_dump(mode="json")}
    spec = params.instance
    if spec.kind == "stateless" and spec.channel.kind == "erasure":
        payload["reference"] = erasure_reference(spec.channel.eps)
    frame = to_frame([_region_row(p) for p in frontier.points], REGION_COLUMNS)
    header = {"seed": seed, "restarts": params.restarts, "max_evals": params.max_evals}
    return RunResult(frame, payload, header)


# CSV names of the bounds without and with the G2 register
DECOUPLE_CSV_NAMES = {"rhs": "rhs57", "rhs_shared": "rhs58"}


def run_decouple(params: DecoupleParams, seed: int) -> RunResult:
    omega = channel_omega(build_channel(params.channel))
    report = run_iid_decoupling(
        DecouplingConfig(
            omega,
            dim_s=params.dim_s,
            dim_g=params.dim_g,
            blocklengths=tuple(params.blocklengths),
            samples=params.samples,
            epsilon=params.epsilon,
            seed=seed,
        )
    )
    payload = report.model_dump(mode="json")
    payload["passed"] = report.passed
    header = {"seed": seed, "samples": params.samples}
    frame = to_frame(report.rows).rename(columns=DECOUPLE_CSV_NAMES)
    return RunResult(frame, payload, header)


def run_dephasing(params: DephasingParams, seed: int) -> RunResult:
    spec = DephasingSpec(q=params.q, eps0=params.eps0, eps1=params.eps1)
    closed = dephasing_closed_form(spec, params.lambda_grid)
    rows = []
    for i, lam in enumerate(params.lambda_grid):
        row = {
            "lambda": lam,
            "r0_rate": closed.r0[i].rate,
            "r0_leakage": closed.r0[i].leakage,
            "r1_rate": closed.r1[i].rate,
            "r1_leakage": closed.r1[i].leakage,
            "quantum_rate": closed.quantum[i].rate,
            "quantum_leakage": closed.quantum[i].leakage,
        }
        if params.evaluate:
            instance, no_csi = dephasing_candidate(spec, lam, use_csi=False)
            _, csi = dephasing_candidate(spec, lam, use_csi=True)
            r0 = eval_ea_point(instance, no_csi, classical=True)
            r1 = eval_ea_point(instance, csi, classical=True)
            row.update(
                r0_eval_rate=r0.rate,
                r0_eval_leakage=r0.leakage,
                r1_eval_rate=r1.rate,
                r1_eval_leakage=r1.leakage,
                quantum_eval_rate=eval_unassisted_inner(instance, csi).rate,
            )
        row["flag"] = closed.r0[i].flag
        rows.append(row)
    return RunResult(to_frame(rows), closed.model_dump(mode="json"), {"seed": seed})


def run_classcheck(params: ClassCheckParams, seed: int) -> RunResult:
    instance = build_instance(params.instance)
    if params.check in ("less_noisy", "less_noisy_swap"):
        report = check_less_noisy(
            instance.dilation,
            instance.triple,
            trials=params.trials,
            seed=seed,
            dim_a=params.dim_a,
            swap=params.check == "less_noisy_swap",
        )
    elif params.check == "degradable":
        hspec = build_hadamard_spec(params.instance)
        report = check_degradable(
            instance.dilation,
            measure_prepare_degrader(hspec),
            instance.triple,
            trials=params.trials,
            seed=seed,
            dim_a=params.dim_a,
        )
    else:
        report = hadamard_L_check(
            build_hadamard_spec(params.instance),
            trials=params.trials,
            seed=seed,
            dim_a=params.dim_a,
            coherent=params.coherent,
        )
    header = {"seed": seed, "trials": params.trials}
    return RunResult(to_frame([report]), report.model_dump(mode="json"), header)


def _code_instance(params: CodeParams) -> MaskingInstance:
    if params.instance is not None:
        return build_instance(params.instance)
    channel = build_channel(params.channel or ChannelSpec(kind="identity"))
    return MaskingInstance(*stateless(channel))


def build_code(params: CodeParams) -> CodeSpec:
    """The ``CodeSpec`` of a custom code manifest."""
    if params.encoder is None or params.decoder is None:
        raise SpecError("a custom code needs an encoder and a decoder")
    entangled: Optional[PureState] = None
    if params.entangled_state is not None:
        state = params.entangled_state.to_state()
        if not isinstance(state, PureState):
            raise SpecError("the entangled state must be pure")
        entangled = state
    return CodeSpec(
        params.blocklength,
        params.encoder.to_channel(),
        params.decoder.to_channel(),
        entangled,
    )


def run_code(params: CodeParams, seed: int) -> RunResult:
    if params.protocol == "teleportation":
        plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
        message: Any = PureState(plus, SubsystemShape.of((M, 2)))
        if params.message_state is not None:
            message = params.message_state.to_state()
        report = teleportation(message)
    else:
        if params.protocol == "superdense":
            instance = _code_instance(params)
            code = superdense_code()
        elif params.protocol == "trivial":
            instance = build_instance(params.instance)
            code = trivial_code(instance)
        elif params.protocol == "custom":
            instance = _code_instance(params)
            code = build_code(params)
        else:
            instance = build_instance(params.instance)
            code = preflip_superdense_code()
        if params.constant_decoder:
            code = constant_decoder(code)
        if params.messages == "basis":
            messages = basis_messages(code.message_dim)
        else:
            messages = default_messages(code.message_dim, seed)
        report = evaluate_code(instance, code, messages, seed=seed)
    summary = report.model_dump(mode="json", exclude={"messages", "extras"})
    summary.update(report.extras)
    summary["messages_tested"] = len(report.messages)
    header = {"seed": seed, "messages": len(report.messages)}
    return RunResult(to_frame([summary]), report.model_dump(mode="json"), header)


RUNNERS: Dict[str, Callable[[Any, int], RunResult]] = {
    "entropy": run_entropy,
    "region": run_region,
    "decouple": run_decouple,
    "dephasing": run_dephasing,
    "classcheck": run_classcheck,
    "code": run_code,
}


def run_manifest(manifest: Any, seed: Optional[int] = None) -> Tuple[RunResult, int]:
    """Run ``manifest``; an explicit ``seed`` wins over the manifest's own."""
    resolved = seed if seed is not None else manifest.seed
    if resolved is None:
        resolved = 0
    logger.info("Running %s with seed %d", manifest.command, resolved)
    return RUNNERS[manifest.command](manifest.params, resolved), resolved
