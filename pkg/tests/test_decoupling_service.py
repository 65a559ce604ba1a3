"""
Tests for op operators, the induced channel T and the decoupling estimates.
"""
import math

import numpy as np
import pytest

from qmask.core.linalg import SubsystemShape, haar_unitary, haar_vector, trace_norm
from qmask.exceptions import (
    ConfigurationError,
    DimensionLimitError,
    EmbeddingError,
    LabelError,
    PurityError,
)
from qmask.models.quantum import A, A_PRIME, B, K, R, DensityOperator, PureState
from qmask.services.decoupling_service import (
    DecouplingConfig,
    DecouplingService,
    apply_op,
    build_op,
    channel_omega,
    one_shot_rhs,
    run_iid_decoupling,
    t_channel,
    uhlmann_isometry,
)
from qmask.services.entropy_service import conditional_entropy
from qmask.services.quantum_service import apply_channel, maximally_entangled


def trivial_k_omega(dim: int = 2) -> PureState:
    """Phi_AB (x) |0>_K with a one-dimensional K."""
    phi = maximally_entangled(dim)
    return phi.tensor(PureState(np.ones(1), SubsystemShape.of((K, 1))))


def random_pure(rng, *pairs) -> PureState:
    shape = SubsystemShape.of(*pairs)
    return PureState(haar_vector(shape.dim, rng), shape)


class TestBuildOp:
    """Tests for build_op and apply_op."""

    def test_basis_case(self):
        psi = PureState(np.array([0, 1, 0, 0]), SubsystemShape.of((A, 2), (B, 2)))
        op = build_op(psi, [A], [B])
        expected = np.zeros((2, 2))
        expected[1, 0] = 1.0
        assert np.allclose(op.matrix, expected)

    def test_maximally_entangled(self):
        op = build_op(maximally_entangled(2), [A], [B])
        assert np.allclose(op.matrix, np.eye(2) / math.sqrt(2))

    @pytest.mark.parametrize("dim", range(2, 7))
    def test_reconstruction_identity(self, dim, rng):
        psi = random_pure(rng, (A, dim), (B, 3))
        phi = maximally_entangled(dim, (A, A_PRIME))
        out, shape = apply_op(build_op(psi, [A], [B]), phi)
        assert shape.labels == (A_PRIME, B)
        target = psi.relabel({A: A_PRIME}).amplitudes
        assert np.max(np.abs(math.sqrt(dim) * out - target)) <= 1e-10

    def test_commutation_identity(self, rng):
        for i in range(100):
            d_a, d_b, d_c = 2 + i % 3, 2 + (i // 3) % 3, 2 + (i // 9) % 3
            psi = random_pure(rng, (A, d_a), (B, d_b))
            theta = random_pure(rng, (A, d_a), ("C", d_c))
            lhs, _ = apply_op(build_op(psi, [A], [B]), theta)
            rhs, _ = apply_op(build_op(theta, [A], ["C"]), psi)
            lhs = lhs.reshape(d_c, d_b)
            rhs = rhs.reshape(d_b, d_c).T
            assert np.max(np.abs(lhs - rhs)) <= 1e-10

    def test_mixed_input_rejected(self):
        rho = DensityOperator.maximally_mixed(SubsystemShape.of((A, 2), (B, 2)))
        with pytest.raises(PurityError):
            build_op(rho, [A], [B])

    def test_partition_required(self):
        with pytest.raises(LabelError):
            build_op(maximally_entangled(2), [A], [A])


class TestTChannel:
    """Tests for t_channel and channel_omega."""

    def test_constant_channel(self, random_state):
        omega = maximally_entangled(2).tensor(
            PureState(np.array([1.0, 0.0]), SubsystemShape.of((K, 2)))
        )
        ch = t_channel(omega)
        out = apply_channel(ch, random_state((A, 2)))
        assert np.allclose(out.matrix, np.diag([1.0, 0.0]), atol=1e-12)

    def test_reproduces_environment_marginal(self, phase_flip):
        omega = channel_omega(phase_flip)
        assert omega.labels == (A, B, K)
        ch = t_channel(omega)
        assert ch.completeness_residual() <= 1e-8
        out = apply_channel(ch, omega.reduce([A]))
        assert trace_norm(out.matrix - omega.reduce([K]).matrix) <= 1e-9

    def test_trace_preserving_on_random_inputs(self, phase_flip, random_state):
        ch = t_channel(channel_omega(phase_flip))
        for _ in range(10):
            out = apply_channel(ch, random_state((A, 2)))
            assert np.trace(out.matrix).real == pytest.approx(1.0, abs=1e-8)

    def test_non_channel_omega_warns(self, rng, caplog):
        omega = random_pure(rng, (A, 2), (B, 2), (K, 2))
        with caplog.at_level("WARNING"):
            t_channel(omega)
        assert "not trace preserving" in caplog.text


class TestDecouplingConfig:
    def test_rejects_zero_samples(self):
        with pytest.raises(ConfigurationError):
            DecouplingConfig(trivial_k_omega(), samples=0)

    def test_rejects_negative_epsilon(self):
        with pytest.raises(ConfigurationError):
            DecouplingConfig(trivial_k_omega(), epsilon=-0.1)


class TestIidDecoupling:
    """Tests for run_iid_decoupling."""

    def test_rhs_arithmetic(self):
        cfg = DecouplingConfig(trivial_k_omega(), dim_s=2, dim_g=2)
        service = DecouplingService(cfg)
        rhs, rhs_shared = service.rhs(3)
        assert rhs == pytest.approx(math.sqrt(2**-3), abs=1e-4)
        assert rhs == pytest.approx(0.3536, abs=1e-4)
        assert rhs_shared >= rhs

    def test_trivial_k_below_bound(self):
        cfg = DecouplingConfig(
            trivial_k_omega(), dim_s=2, dim_g=2, blocklengths=(3,), samples=20, seed=1
        )
        row = run_iid_decoupling(cfg).rows[0]
        assert row.mean <= row.rhs
        assert row.passed and row.passed_shared

    def test_same_seed_same_report(self, phase_flip):
        cfg = DecouplingConfig(
            channel_omega(phase_flip), blocklengths=(1, 2), samples=10, seed=42
        )
        first = run_iid_decoupling(cfg).model_dump()
        second = run_iid_decoupling(cfg).model_dump()
        assert first == second

    def test_embedding_checked(self, phase_flip):
        cfg = DecouplingConfig(
            channel_omega(phase_flip), dim_s=4, dim_g=2, blocklengths=(2,), samples=2
        )
        with pytest.raises(ConfigurationError):
            run_iid_decoupling(cfg)

    def test_dimension_cap(self, phase_flip, monkeypatch):
        from qmask.core.config import get_settings

        monkeypatch.setenv("QMASK_DECOUPLING_DIM_CAP", "4")
        get_settings.cache_clear()
        cfg = DecouplingConfig(channel_omega(phase_flip), blocklengths=(3,), samples=2)
        with pytest.raises(DimensionLimitError):
            run_iid_decoupling(cfg)

    def test_entropy_matches_omega(self, phase_flip):
        omega = channel_omega(phase_flip)
        report = run_iid_decoupling(
            DecouplingConfig(omega, blocklengths=(1,), samples=5)
        )
        assert report.h_a_given_k == pytest.approx(conditional_entropy(omega, [A], [K]))
        assert report.h_a_given_k > 0

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "dim_s,dim_g,n",
        [
            (1, 1, 1),
            (1, 1, 2),
            (1, 1, 3),
            (2, 2, 2),
            (2, 2, 3),
            (4, 1, 2),
            (4, 1, 3),
            (1, 4, 2),
        ],
    )
    def test_mean_below_bound(self, phase_flip, dim_s, dim_g, n):
        cfg = DecouplingConfig(
            channel_omega(phase_flip),
            dim_s=dim_s,
            dim_g=dim_g,
            blocklengths=(n,),
            samples=200,
            seed=7,
        )
        row = run_iid_decoupling(cfg).rows[0]
        assert row.passed
        assert row.passed_shared
        assert row.rhs_shared >= row.rhs

    @pytest.mark.slow
    def test_means_nonincreasing(self, phase_flip):
        cfg = DecouplingConfig(
            channel_omega(phase_flip), blocklengths=(1, 2, 3), samples=200, seed=3
        )
        rows = run_iid_decoupling(cfg).rows
        tol = 2 * max(row.std for row in rows)
        for earlier, later in zip(rows, rows[1:]):
            assert later.mean <= earlier.mean + tol


class TestOneShot:
    """Tests for one_shot_rhs."""

    def test_product_states(self):
        zeta = DensityOperator.maximally_mixed(SubsystemShape.of((A_PRIME, 2), (K, 2)))
        rho = DensityOperator.maximally_mixed(SubsystemShape.of((A, 2), (R, 2)))
        result = one_shot_rhs(zeta, rho)
        assert result.value == pytest.approx(0.5, abs=1e-9)
        assert result.flag == "unsmoothed surrogate"

    def test_entangled_zeta_is_vacuous(self):
        zeta = maximally_entangled(2, (A_PRIME, K)).density()
        rho = DensityOperator.maximally_mixed(SubsystemShape.of((A, 2), (R, 2)))
        assert one_shot_rhs(zeta, rho).value == pytest.approx(1.0, abs=1e-9)

    def test_dimension_floor(self, random_state):
        zeta = random_state((A_PRIME, 2), (K, 2))
        rho = random_state((A, 3), (R, 2))
        floor = 2.0 ** (-(1 + math.log2(3)) / 2)
        assert one_shot_rhs(zeta, rho).value >= floor - 1e-9


class TestUhlmann:
    """Tests for uhlmann_isometry."""

    def test_equal_marginals(self, rng):
        for _ in range(10):
            psi = random_pure(rng, (A, 2), (B, 3))
            u = haar_unitary(3, rng)
            amps = (psi.amplitudes.reshape(2, 3) @ u.T).reshape(-1)
            theta = PureState(amps, SubsystemShape.of((A, 2), ("C", 3)))
            assert uhlmann_isometry(psi, theta).distance <= 1e-8

    def test_swapped_basis(self):
        psi = maximally_entangled(2)
        amps = np.array([0, 1, 1, 0]) / math.sqrt(2)
        theta = PureState(amps, SubsystemShape.of((A, 2), ("C", 2)))
        assert uhlmann_isometry(psi, theta).distance <= 1e-8

    def test_perturbed_pairs_within_bound(self, rng):
        for _ in range(50):
            psi = random_pure(rng, (A, 2), (B, 2))
            noise = haar_vector(4, rng)
            theta = PureState.normalized(
                psi.amplitudes + 0.1 * noise, SubsystemShape.of((A, 2), ("C", 2))
            )
            result = uhlmann_isometry(psi, theta)
            assert result.distance <= result.bound + 1e-9

    def test_embedding_error(self):
        psi = maximally_entangled(2)
        theta = PureState(np.array([1.0, 0.0]), SubsystemShape.of((A, 2), ("C", 1)))
        with pytest.raises(EmbeddingError):
            uhlmann_isometry(psi, theta)
