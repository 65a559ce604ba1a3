"""
Tests for explicit code evaluation and the reference protocols.
"""
import numpy as np
import pytest

from qmask.core.linalg import SubsystemShape, haar_vector
from qmask.exceptions import DimensionLimitError, SpecError
from qmask.models.quantum import G_A, G_B, M, KrausChannel, PureState
from qmask.services.harness_service import (
    CodeSpec,
    basis_messages,
    bell_state,
    constant_decoder,
    default_messages,
    evaluate_code,
    pauli,
    preflip_superdense_code,
    superdense,
    superdense_code,
    teleportation,
    trivial_code,
)
from qmask.services.entropy_service import conditional_mutual_information
from qmask.services.quantum_service import apply_channel, maximally_entangled
from qmask.services.zoo_service import phase_flip_channel


class TestHelpers:
    def test_paulis_are_unitary(self):
        for m in range(4):
            p = pauli(m)
            assert np.allclose(p.conj().T @ p, np.eye(2))

    def test_bell_states_orthonormal(self):
        vecs = np.array([bell_state(m).amplitudes for m in range(4)])
        assert np.allclose(vecs.conj() @ vecs.T, np.eye(4), atol=1e-12)

    def test_default_messages(self):
        messages = default_messages(4, seed=1)
        names = [name for name, _ in messages]
        assert names[:4] == ["basis 0", "basis 1", "basis 2", "basis 3"]
        assert names[-1] == "maximally mixed"
        assert len(messages) == 9


class TestCodeSpec:
    """Tests for CodeSpec validation and rates."""

    def test_rates(self):
        code = superdense_code()
        assert code.message_dim == 4
        assert code.rate == pytest.approx(2.0)
        assert code.entanglement_rate == pytest.approx(1.0)

    def test_blocklength_validated(self):
        code = superdense_code()
        with pytest.raises(SpecError):
            CodeSpec(0, code.encoder, code.decoder, code.entangled_state)


class TestEvaluateCode:
    """Tests for evaluate_code on small instances."""

    def test_preflip_superdense_masks_controlled_z(self, controlled_z_instance):
        report = evaluate_code(
            controlled_z_instance, preflip_superdense_code(), basis_messages(4)
        )
        assert report.error <= 1e-9
        assert report.leakage <= 1e-9
        assert report.extras["rate"] == pytest.approx(2.0)
        assert len(report.messages) == 4

    def test_trivial_code_on_identity(self, identity_instance):
        code = trivial_code(identity_instance)
        report = evaluate_code(identity_instance, code, seed=3)
        assert report.error <= 1e-9
        assert report.leakage <= 1e-9

    def test_leakage_within_ceiling(self, dephasing_instance):
        report = evaluate_code(dephasing_instance, trivial_code(dephasing_instance))
        assert report.leakage <= report.leakage_ceiling + 1e-9
        assert report.error > 0

    def test_constant_decoder_fails(self, identity_instance):
        code = constant_decoder(superdense_code())
        report = evaluate_code(identity_instance, code, basis_messages(4))
        assert report.error == pytest.approx(1.0)
        assert report.messages[0].error == pytest.approx(0.0, abs=1e-12)

    def test_code_dimension_cap(self, identity_instance, monkeypatch):
        from qmask.core.config import get_settings

        monkeypatch.setenv("QMASK_CODE_DIM_CAP", "4")
        get_settings.cache_clear()
        with pytest.raises(DimensionLimitError):
            evaluate_code(identity_instance, superdense_code(), basis_messages(4))


class TestSuperdense:
    """Tests for superdense."""

    @pytest.mark.parametrize("bits", [(0, 0), (0, 1), (1, 0), (1, 1)])
    def test_noiseless(self, bits):
        report = superdense(bits)
        assert report.error <= 1e-12
        assert report.extras["bits_per_use"] == 2.0

    def test_noisy_channel_errs(self):
        report = superdense((0, 0), phase_flip_channel(0.2))
        assert report.error == pytest.approx(0.2, abs=1e-9)

    def test_bits_validated(self):
        with pytest.raises(SpecError):
            superdense((2, 0))


class TestTeleportation:
    """Tests for teleportation."""

    def test_random_states_arrive_intact(self, rng):
        shape = SubsystemShape.of((M, 2))
        for _ in range(20):
            report = teleportation(PureState(haar_vector(2, rng), shape))
            assert report.error <= 1e-10
            assert report.extras["fidelity_distance"] <= 1e-9
            assert report.extras["ebits"] == 1.0

    def test_fidelity_distance_stays_below_round_off_floor(self):
        """Two hundred Haar qubits all arrive within 1e-9 in fidelity distance."""
        rng = np.random.default_rng(7)
        shape = SubsystemShape.of((M, 2))
        worst = max(
            teleportation(PureState(haar_vector(2, rng), shape)).extras[
                "fidelity_distance"
            ]
            for _ in range(200)
        )
        assert worst <= 1e-9

    def test_mixed_message(self, random_state):
        rho = random_state((M, 2))
        report = teleportation(rho)
        assert report.error <= 1e-10
        assert report.extras["fidelity_distance"] <= 1e-6

    def test_global_phase_does_not_change_result(self, rng):
        shape = SubsystemShape.of((M, 2))
        v = haar_vector(2, rng)
        plain = teleportation(PureState(v, shape))
        phased = teleportation(PureState(np.exp(0.7j) * v, shape))
        assert phased.error == pytest.approx(plain.error, abs=1e-12)
        assert phased.extras["fidelity_distance"] == pytest.approx(
            plain.extras["fidelity_distance"], abs=1e-12
        )

    def test_rejects_qutrits(self, rng):
        shape = SubsystemShape.of((M, 3))
        with pytest.raises(SpecError):
            teleportation(PureState(haar_vector(3, rng), shape))


def _ignore_g_a(code):
    """The same encoder with a G_A input it traces out."""
    enc = code.encoder
    bras = [np.eye(2, dtype=complex)[g][None, :] for g in range(2)]
    ops = tuple(np.kron(k, bra) for k in enc.kraus_ops for bra in bras)
    in_shape = enc.in_shape.concat(SubsystemShape.of((G_A, 2)))
    return KrausChannel(ops, in_shape, enc.out_shape)


def _ignore_g_b(code):
    """The same decoder with a G_B input it traces out."""
    dec = code.decoder
    bras = [np.eye(2, dtype=complex)[g][None, :] for g in range(2)]
    ops = tuple(np.kron(k, bra) for k in dec.kraus_ops for bra in bras)
    in_shape = dec.in_shape.concat(SubsystemShape.of((G_B, 2)))
    return KrausChannel(ops, in_shape, dec.out_shape)


class TestCodeInvariants:
    """Invariants of the error and leakage functionals."""

    def test_error_invariant_under_global_phase(self, dephasing_instance, rng):
        code = trivial_code(dephasing_instance)
        shape = SubsystemShape.of((M, 2))
        v = haar_vector(2, rng)
        messages = [
            ("plain", PureState(v, shape).density()),
            ("phased", PureState(np.exp(2.1j) * v, shape).density()),
        ]
        report = evaluate_code(dephasing_instance, code, messages)
        plain, phased = report.messages
        assert phased.error == pytest.approx(plain.error, abs=1e-12)
        assert phased.leakage == pytest.approx(plain.leakage, abs=1e-12)

    def test_unassisted_leakage_is_plain_mutual_information(self, dephasing_instance):
        """Without entanglement the leakage is I(C;B) of the channel output."""
        code = trivial_code(dephasing_instance)
        messages = basis_messages(2)
        report = evaluate_code(dephasing_instance, code, messages)
        triple = dephasing_instance.triple
        b_labels = dephasing_instance.channel.out_shape.labels
        for (_, rho_m), diagnostic in zip(messages, report.messages):
            encoded = apply_channel(code.encoder, triple.state.tensor(rho_m))
            received = apply_channel(dephasing_instance.channel, encoded)
            expected = conditional_mutual_information(
                received, triple.c_labels, b_labels
            )
            assert diagnostic.leakage == pytest.approx(expected, abs=1e-9)

    def test_idle_entanglement_leaves_leakage_unchanged(self, dephasing_instance):
        """An encoder that ignores G_A leaks the same with or without Psi."""
        plain = trivial_code(dephasing_instance)
        assisted = CodeSpec(
            1,
            _ignore_g_a(plain),
            _ignore_g_b(plain),
            maximally_entangled(2, (G_A, G_B)),
        )
        messages = default_messages(2, seed=5)
        without = evaluate_code(dephasing_instance, plain, messages)
        with_psi = evaluate_code(dephasing_instance, assisted, messages)
        for a, b in zip(without.messages, with_psi.messages):
            assert b.leakage == pytest.approx(a.leakage, abs=1e-9)
            assert b.error == pytest.approx(a.error, abs=1e-9)
        assert assisted.entanglement_rate == pytest.approx(1.0)


class TestSuperdenseTeleportation:
    """Superdense coding and teleportation trade one resource for the other."""

    def test_round_trip_on_random_states(self, rng):
        """Teleport random qubits whose two outcome bits go by superdense coding."""
        carriers = {bits: superdense(bits) for bits in [(0, 0), (0, 1), (1, 0), (1, 1)]}
        for carried in carriers.values():
            assert carried.error <= 1e-9
            assert carried.extras["bits_per_use"] == 2.0
        shape = SubsystemShape.of((M, 2))
        for _ in range(25):
            report = teleportation(PureState(haar_vector(2, rng), shape))
            assert report.extras["classical_bits"] == 2.0
            assert report.extras["ebits"] == 1.0
            assert report.error <= 1e-9
            assert report.extras["fidelity_distance"] <= 1e-9
