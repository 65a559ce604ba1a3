"""
Tests for rate-leakage evaluation, optimisation and the closed forms.
"""
import numpy as np
import pytest

from qmask.core.linalg import SubsystemShape
from qmask.exceptions import ConfigurationError, ConstraintError
from qmask.models.quantum import (
    A,
    A_PRIME,
    C,
    E,
    E0,
    ChannelStateTriple,
    DensityOperator,
)
from qmask.models.schemas.reports import ACHIEVABLE, INNER_ONLY, OUTER_EVALUATION
from qmask.services.entropy_service import conditional_entropy
from qmask.services.quantum_service import stinespring
from qmask.services.region_service import (
    FreeFamily,
    InputCandidate,
    MaskingInstance,
    coding_exponents,
    dephasing_candidate,
    dephasing_closed_form,
    erasure_reference,
    eval_ea_point,
    eval_hadamard_outer,
    eval_rate_limited,
    eval_unassisted_inner,
    is_maximally_correlated,
    make_family,
    optimize_region,
    power_instance,
    product_candidate,
)
from qmask.services.zoo_service import DephasingSpec, dephasing_channel

LAMBDAS = [i / 20 for i in range(11)]


class TestMaskingInstance:
    """Tests for MaskingInstance and its powers."""

    def test_maximally_correlated_detected(self, dephasing_instance):
        assert dephasing_instance.maximally_correlated
        assert dephasing_instance.a_prime.labels == (A_PRIME,)

    def test_mixed_triple_is_not_maximally_correlated(self, dephasing_instance):
        shape = SubsystemShape.of((E, 2), (E0, 2), (C, 2))
        triple = ChannelStateTriple(DensityOperator.maximally_mixed(shape))
        assert not is_maximally_correlated(triple)
        instance = MaskingInstance(dephasing_instance.channel, triple)
        point = eval_ea_point(instance, product_candidate(instance))
        assert point.bound == INNER_ONLY
        assert point.flag == "inner bound only"

    def test_lift_adds_purifying_system(self, dephasing_instance):
        lifted = dephasing_instance.lifted()
        assert lifted.is_lifted
        assert lifted.channel.in_shape.labels[0] == "T"
        assert lifted.lifted() is lifted

    def test_two_letter_power(self, dephasing_instance):
        pair = power_instance(dephasing_instance, 2)
        assert pair.letters == 2
        assert pair.channel.in_shape.labels == ("E.1", "A'.1", "E.2", "A'.2")
        assert pair.triple.c_labels == ("C.1", "C.2")
        assert pair.h_c() == pytest.approx(2 * dephasing_instance.h_c())

    def test_three_letters_rejected(self, dephasing_instance):
        with pytest.raises(ConfigurationError):
            power_instance(dephasing_instance, 3)

    def test_additive_on_product_candidates(self, dephasing_instance):
        cand = product_candidate(dephasing_instance)
        single = eval_ea_point(dephasing_instance, cand)
        pair = power_instance(dephasing_instance, 2)
        double = eval_ea_point(pair, product_candidate(pair))
        assert double.rate == pytest.approx(single.rate, abs=1e-9)
        assert double.leakage == pytest.approx(single.leakage, abs=1e-9)


class TestEvaluation:
    """Tests for the per-candidate evaluators."""

    def test_infeasible_candidate(self, dephasing_instance):
        shape = SubsystemShape.of((A, 2), (E, 2), (A_PRIME, 2), (C, 2))
        cand = InputCandidate(DensityOperator.maximally_mixed(shape))
        with pytest.raises(ConstraintError):
            eval_ea_point(dephasing_instance, cand)

    def test_rate_limited_corners(self, dephasing_instance):
        cand = product_candidate(dephasing_instance)
        region = eval_rate_limited(dephasing_instance, cand)
        assert region.h_a_given_ec == pytest.approx(1.0, abs=1e-9)
        assert region.corners[0].rate == pytest.approx(
            max(0.0, min(region.h_a_given_ec, region.icoh))
        )
        assert region.max_rate(0.0) == pytest.approx(region.corners[0].rate)
        if len(region.corners) > 1:
            corner = region.corners[1]
            assert corner.rate + corner.entanglement_rate == pytest.approx(
                region.h_a_given_ec
            )

    def test_leakage_below_twice_state_entropy(self, dephasing_instance, rng):
        family = make_family(dephasing_instance, "controlled")
        for _ in range(5):
            cand = family.build(family.random_params(rng))
            point = eval_ea_point(dephasing_instance, cand)
            assert point.leakage <= 2 * dephasing_instance.h_c() + 1e-9
            assert point.bound == ACHIEVABLE

    def test_outer_needs_dilation(self, dephasing_instance):
        with pytest.raises(ConfigurationError):
            eval_hadamard_outer(
                dephasing_instance, product_candidate(dephasing_instance)
            )

    def test_pure_candidates_outer_equals_coherent_information(
        self, dephasing_spec, rng
    ):
        channel, triple = dephasing_channel(dephasing_spec)
        instance = MaskingInstance(channel, triple, stinespring(channel))
        for i in range(50):
            family = FreeFamily(instance, dim_a=2, seed=i)
            cand = family.build(family.random_params(rng))
            point = eval_hadamard_outer(instance, cand)
            assert point.bound == OUTER_EVALUATION
            assert point.terms.h_a_given_ck == pytest.approx(point.terms.icoh, abs=1e-9)

    def test_coherent_information_below_h_a_given_c(self, dephasing_instance, rng):
        """On pure extended inputs H(A|C) >= I(A>B), so R_e is never negative."""
        family = make_family(dephasing_instance, "free")
        c_labels = list(family.instance.triple.c_labels)
        for _ in range(20):
            cand = family.build(family.random_params(rng))
            purity = np.trace(cand.state.matrix @ cand.state.matrix).real
            assert purity == pytest.approx(1.0, abs=1e-9)
            point = eval_ea_point(dephasing_instance, cand)
            h_a_given_c = conditional_entropy(cand.state, [A], c_labels)
            assert h_a_given_c >= point.terms.icoh - 1e-9
            assert point.entanglement_rate >= 0.0

    def test_unknown_family(self, dephasing_instance):
        with pytest.raises(ConfigurationError):
            make_family(dephasing_instance, "nonsense")


class TestDephasingClosedForm:
    """Closed-form dephasing frontiers against direct evaluation."""

    @pytest.mark.parametrize("q", [0.1, 0.3, 0.5])
    @pytest.mark.parametrize("eps0,eps1", [(0.0, 1.0), (0.1, 0.8)])
    def test_matches_evaluated_candidates(self, q, eps0, eps1):
        spec = DephasingSpec(q=q, eps0=eps0, eps1=eps1)
        closed = dephasing_closed_form(spec, LAMBDAS)
        for lam, r0, r1 in zip(LAMBDAS, closed.r0, closed.r1):
            instance, cand = dephasing_candidate(spec, lam, use_csi=False)
            point = eval_ea_point(instance, cand, classical=True)
            assert point.rate == pytest.approx(r0.rate, abs=1e-9)
            assert point.leakage == pytest.approx(r0.leakage, abs=1e-9)
            instance, cand = dephasing_candidate(spec, lam, use_csi=True)
            point = eval_ea_point(instance, cand, classical=True)
            assert point.rate == pytest.approx(r1.rate, abs=1e-9)
            assert point.leakage == pytest.approx(r1.leakage, abs=1e-9)

    def test_controlled_z_corner(self):
        closed = dephasing_closed_form(DephasingSpec(q=0.5, eps0=0.0, eps1=1.0), [0.0])
        assert closed.r1[0].rate == pytest.approx(2.0)
        assert closed.r1[0].leakage == pytest.approx(0.0)
        assert closed.r0[0].rate == pytest.approx(1.0)
        assert closed.r0[0].leakage == pytest.approx(1.0)

    def test_quantum_frontier(self, dephasing_spec):
        closed = dephasing_closed_form(dephasing_spec, LAMBDAS)
        for r1, quantum in zip(closed.r1, closed.quantum):
            assert quantum.rate == pytest.approx(max(0.0, r1.rate - 1.0))
            assert quantum.leakage == pytest.approx(r1.leakage)

    def test_outside_regime_flagged(self):
        closed = dephasing_closed_form(DephasingSpec(q=0.2, eps0=0.6, eps1=0.9), [0.1])
        assert not closed.in_regime
        assert closed.r0[0].flag == "outside regime"


class TestOptimizeRegion:
    """Tests for optimize_region."""

    @pytest.mark.parametrize("eps", [0.1, 0.25, 0.4])
    def test_erasure_ea_capacity(self, erasure_instance, eps):
        frontier = optimize_region(
            erasure_instance(eps), "ea", "product", restarts=1, max_evals=200
        )
        assert frontier.points[0].rate == pytest.approx(1 - eps, abs=5e-3)

    @pytest.mark.parametrize("eps", [0.1, 0.25, 0.4, 0.6])
    def test_erasure_unassisted(self, erasure_instance, eps):
        frontier = optimize_region(
            erasure_instance(eps),
            "unassisted_inner",
            "product",
            restarts=1,
            max_evals=200,
        )
        expected = erasure_reference(eps)["unassisted"]
        assert frontier.points[0].rate == pytest.approx(expected, abs=5e-3)

    def test_controlled_z_reaches_two_bits_without_leakage(self, controlled_z_instance):
        frontier = optimize_region(
            controlled_z_instance,
            "ea_classical_capacity_leakage",
            "controlled",
            leakage_grid=[0.0],
            restarts=2,
            max_evals=50,
        )
        point = frontier.points[0]
        assert point.rate == pytest.approx(2.0, abs=1e-9)
        assert point.leakage <= 1e-9

    def test_frontier_monotone_and_capped(self, dephasing_instance):
        grid = [0.2, 0.0, 0.1]
        frontier = optimize_region(
            dephasing_instance,
            "ea_classical_capacity_leakage",
            "controlled",
            leakage_grid=grid,
            restarts=2,
            max_evals=100,
            seed=11,
        )
        caps = [p.leakage_cap for p in frontier.points]
        assert caps == sorted(grid)
        rates = [p.rate for p in frontier.points]
        assert rates == sorted(rates)
        for point in frontier.points:
            if point.rate > 0:
                assert point.leakage <= point.leakage_cap + 1e-9

    def test_same_seed_same_frontier(self, dephasing_instance):
        kwargs = dict(
            objective="ea",
            family="product",
            restarts=3,
            max_evals=60,
            seed=5,
        )
        first = optimize_region(dephasing_instance, **kwargs).model_dump()
        second = optimize_region(dephasing_instance, **kwargs).model_dump()
        assert first == second

    def test_grid_required(self, dephasing_instance):
        with pytest.raises(ConfigurationError):
            optimize_region(dephasing_instance, "ea_capacity_leakage", "product")

    def test_unknown_objective(self, dephasing_instance):
        with pytest.raises(ConfigurationError):
            optimize_region(dephasing_instance, "bogus", "product", restarts=1)


class TestReferences:
    def test_erasure_reference(self):
        assert erasure_reference(0.25) == {"ea": 0.75, "unassisted": 0.5}
        assert erasure_reference(0.6)["unassisted"] == 0.0
        with pytest.raises(ConfigurationError):
            erasure_reference(1.2)

    def test_coding_exponents_decay(self, dephasing_instance):
        point = eval_unassisted_inner(
            dephasing_instance, product_candidate(dephasing_instance)
        )
        rate = point.rate / 2
        short = coding_exponents(point, rate, 0.0, n=10)
        long = coding_exponents(point, rate, 0.0, n=100)
        assert long.error_bound < short.error_bound
        assert long.delta1 < short.delta1

    def test_coding_exponents_validates_n(self, dephasing_instance):
        point = eval_unassisted_inner(
            dephasing_instance, product_candidate(dephasing_instance)
        )
        with pytest.raises(ConfigurationError):
            coding_exponents(point, 0.1, 0.0, n=0)

    def test_explicit_candidate_roundtrip(self, dephasing_instance):
        cand = product_candidate(dephasing_instance)
        assert cand.family == "product"
        assert np.trace(cand.state.matrix).real == pytest.approx(1.0)
