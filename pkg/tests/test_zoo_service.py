"""
Tests for the channel zoo and the structural class checks.
"""
import numpy as np
import pytest
from pydantic import ValidationError

from qmask.core.linalg import SubsystemShape, haar_unitary, trace_norm
from qmask.exceptions import ConfigurationError, LabelError, SpecError
from qmask.models.quantum import (
    A_PRIME,
    B,
    C,
    C1,
    E,
    K,
    DensityOperator,
    IsometricDilation,
)
from qmask.services.harness_service import constant_channel
from qmask.services.quantum_service import (
    apply_channel,
    identity_channel,
    maximally_correlated,
    stinespring,
    trivial_triple,
)
from qmask.services.zoo_service import (
    PAULI_Z,
    DephasingSpec,
    average_dephasing,
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
    sample_extensions,
    stateless,
)

PLUS = np.full((2, 2), 0.5, dtype=complex)


def on_state(s: int, rho: np.ndarray) -> DensityOperator:
    """|s><s|_E (x) rho_A'."""
    e = np.zeros((2, 2), dtype=complex)
    e[s, s] = 1.0
    return DensityOperator(np.kron(e, rho), SubsystemShape.of((E, 2), (A_PRIME, 2)))


class TestDephasing:
    """Tests for DephasingSpec and dephasing_channel."""

    def test_spec_averages(self, dephasing_spec):
        assert dephasing_spec.eps_bar == pytest.approx(0.7 * 0.1 + 0.3 * 0.8)
        assert dephasing_spec.eps_hat == pytest.approx(0.7 * 0.1 + 0.3 * 0.2)
        assert dephasing_spec.in_regime

    def test_q_above_half_rejected(self):
        with pytest.raises(ValidationError):
            DephasingSpec(q=0.6, eps0=0.1, eps1=0.8)

    @pytest.mark.parametrize("s,eps", [(0, 0.1), (1, 0.8)])
    def test_branch_is_phase_flip(self, dephasing_spec, s, eps):
        channel, _ = dephasing_channel(dephasing_spec)
        out = apply_channel(channel, on_state(s, PLUS))
        expected = (1 - eps) * PLUS + eps * PAULI_Z @ PLUS @ PAULI_Z
        assert out.labels == (B,)
        assert np.allclose(out.matrix, expected, atol=1e-12)

    def test_triple_is_maximally_correlated(self, dephasing_spec):
        _, triple = dephasing_channel(dephasing_spec)
        assert np.allclose(triple.marginal([C]).matrix, np.diag([0.7, 0.3]))

    def test_average_channel(self, dephasing_spec, random_state):
        channel, triple = dephasing_channel(dephasing_spec)
        rho = random_state((A_PRIME, 2))
        joint = triple.marginal([E]).tensor(rho)
        direct = apply_channel(channel, joint)
        averaged = apply_channel(average_dephasing(dephasing_spec), rho)
        assert np.allclose(direct.matrix, averaged.matrix, atol=1e-12)


class TestErasure:
    """Tests for erasure_channel and stateless."""

    def test_output_blocks(self, random_state):
        rho = random_state((A_PRIME, 2))
        out = apply_channel(erasure_channel(0.25), rho).matrix
        assert np.allclose(out[:2, :2], 0.75 * rho.matrix, atol=1e-12)
        assert out[2, 2].real == pytest.approx(0.25)
        assert np.allclose(out[:2, 2], 0)

    @pytest.mark.parametrize("eps", [0.0, 1.0])
    def test_endpoints(self, eps):
        ch = erasure_channel(eps)
        assert ch.completeness_residual() < 1e-12

    def test_out_of_range(self):
        with pytest.raises(ConfigurationError):
            erasure_channel(1.5)
        with pytest.raises(ConfigurationError):
            phase_flip_channel(-0.1)

    def test_stateless_prepends_trivial_state(self):
        channel, triple = stateless(erasure_channel(0.1))
        assert channel.in_shape.labels == (E, A_PRIME)
        assert channel.in_shape.dims == (1, 2)
        assert triple.state.dim == 1


class TestHadamard:
    """Tests for Hadamard channels and their degraders."""

    def test_dephasing_as_hadamard(self, random_state):
        channel, dilation = hadamard_channel(dephasing_hadamard_spec(0.2))
        assert dilation.out_shape.labels == (B, C1, K)
        reference, _ = stateless(phase_flip_channel(0.2))
        rho = random_state((E, 1), (A_PRIME, 2))
        assert np.allclose(
            apply_channel(channel, rho).matrix,
            apply_channel(reference, rho).matrix,
            atol=1e-12,
        )

    def test_spec_validation(self):
        in_shape = SubsystemShape.of((E, 1), (A_PRIME, 2))
        env = SubsystemShape.of((C1, 1), (K, 1))
        with pytest.raises(SpecError):
            hadamard_spec_from_vectors(
                [[1, 0], [1, 0]], [[1], [1]], [[1, 0], [0, 1]], in_shape, env
            )
        with pytest.raises(SpecError):
            hadamard_spec_from_vectors(
                [[1, 0], [0, 1]], [[1], [1]], [[1, 0], [1, 0]], in_shape, env
            )

    def test_random_spec_is_isometric(self):
        spec = random_hadamard_spec(dim_e=2, dim_a_prime=2, dim_c1=2, dim_k=2, seed=5)
        channel, _ = hadamard_channel(spec)
        assert channel.completeness_residual() < 1e-10

    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_measure_prepare_degrader(self, seed):
        spec = random_hadamard_spec(dim_e=1, seed=seed)
        _, dilation = hadamard_channel(spec)
        report = check_degradable(
            dilation,
            measure_prepare_degrader(spec),
            trivial_triple(),
            trials=50,
            seed=seed,
        )
        assert report.worst_residual <= 1e-9

    def test_degrader_labels_checked(self, phase_flip):
        dilation = stinespring(phase_flip)
        with pytest.raises(LabelError):
            check_degradable(dilation, phase_flip, trivial_triple(), trials=1)

    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_l_factorisation_random(self, seed):
        spec = random_hadamard_spec(dim_e=1, dim_c1=2, dim_k=2, seed=seed)
        report = hadamard_L_check(spec, trials=50, seed=seed)
        assert report.worst_residual <= 1e-8
        assert report.caveat == ""

    def test_l_factorisation_dephasing(self):
        report = hadamard_L_check(dephasing_hadamard_spec(0.3), trials=50, seed=0)
        assert report.worst_residual <= 1e-8

    def test_coherent_inputs_flagged(self):
        spec = random_hadamard_spec(dim_e=1, dim_c1=1, dim_k=2, seed=9)
        report = hadamard_L_check(spec, trials=10, seed=0, coherent=True)
        assert report.worst_residual > 1e-6
        assert "zeta-classical" in report.caveat

    def test_trials_validated(self):
        with pytest.raises(ConfigurationError):
            hadamard_L_check(dephasing_hadamard_spec(0.1), trials=0)

    def test_generic_isometry_fails_factorisation(self):
        """A Haar isometry with the same labels does not factor through L."""
        spec = dephasing_hadamard_spec(0.3)
        generic = IsometricDilation(
            haar_unitary(4, 11)[:, :2],
            spec.in_shape,
            spec.b_shape.concat(spec.env_shape),
            spec.env_shape.labels,
        )
        report = hadamard_L_check(spec, trials=20, seed=0, isometry=generic)
        assert report.worst_residual > 0.05


class TestDegradable:
    """Tests for check_degradable against right and wrong degraders."""

    def test_constant_degrader_on_dephasing_fails(self):
        spec = dephasing_hadamard_spec(0.3)
        _, dilation = hadamard_channel(spec)
        wrong = constant_channel(
            spec.b_shape, DensityOperator.basis_state(spec.env_shape, 0)
        )
        report = check_degradable(dilation, wrong, trivial_triple(), trials=20, seed=1)
        assert report.worst_residual > 0.1

    def test_identity_with_constant_degrader(self):
        channel, triple = stateless(
            identity_channel(SubsystemShape.of((A_PRIME, 2)), [B])
        )
        dilation = stinespring(channel)
        env = dilation.out_shape.subset(dilation.env_labels)
        assert env.dim == 1
        degrader = constant_channel(
            SubsystemShape.of((B, 2)), DensityOperator.basis_state(env, 0)
        )
        report = check_degradable(dilation, degrader, triple, trials=20, seed=2)
        assert report.worst_residual == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("eps", [0.1, 0.3])
    def test_degradable_implies_less_noisy(self, eps):
        """A passing degrader leaves no less-noisy violation on the same samples."""
        spec = dephasing_hadamard_spec(eps)
        _, dilation = hadamard_channel(spec)
        triple = trivial_triple()
        degradable = check_degradable(
            dilation, measure_prepare_degrader(spec), triple, trials=40, seed=6
        )
        assert degradable.worst_residual <= 1e-8
        less_noisy = check_less_noisy(dilation, triple, trials=40, seed=6)
        assert less_noisy.violations == 0


class TestSampling:
    def test_extensions_keep_state_marginal(self, dephasing_instance):
        triple = dephasing_instance.triple
        phi_ec = triple.marginal([E, C]).matrix
        samples = sample_extensions(
            triple, SubsystemShape.of((A_PRIME, 2)), dim_a=2, count=5, seed=4
        )
        for rho in samples:
            assert rho.labels == ("A", E, A_PRIME, C)
            assert trace_norm(rho.reduce([E, C]).matrix - phi_ec) <= 1e-10


class TestLessNoisy:
    """Tests for check_less_noisy."""

    def test_weak_phase_flip_has_no_violation(self):
        channel, triple = dephasing_channel(DephasingSpec(q=0.0, eps0=0.1, eps1=0.8))
        report = check_less_noisy(stinespring(channel), triple, trials=30, seed=2)
        assert report.violations == 0
        assert report.statement == "no violation found in 30 trials"
        assert "Stinespring" in report.caveat

    def test_equal_phase_flips_have_no_violation(self):
        channel, triple = dephasing_channel(DephasingSpec(q=0.0, eps0=0.1, eps1=0.1))
        report = check_less_noisy(stinespring(channel), triple, trials=200, seed=5)
        assert report.violations == 0
        assert report.trials == 200

    def test_identity_has_no_violation(self):
        channel, triple = stateless(
            identity_channel(SubsystemShape.of((A_PRIME, 2)), [B])
        )
        report = check_less_noisy(stinespring(channel), triple, trials=100, seed=3)
        assert report.violations == 0

    def test_swap_finds_reverse_violations(self):
        channel, triple = dephasing_channel(DephasingSpec(q=0.0, eps0=0.1, eps1=0.8))
        report = check_less_noisy(
            stinespring(channel), triple, trials=30, seed=2, swap=True
        )
        assert report.check == "reverse less-noisy"
        assert report.worst_margin > 0

    def test_uniform_triple_shape_checked(self, phase_flip):
        triple = maximally_correlated([0.5, 0.5])
        with pytest.raises(LabelError):
            check_less_noisy(stinespring(phase_flip), triple, trials=1)
