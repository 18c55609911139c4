"""
Unit tests for inexact operators and model-error measurement.
"""

import numpy as np
import pytest

from src.application.services.inexact_projection_service import (
    apply_inexact,
    inexact_cost,
    mask_epsilon_upper_bound,
    measure_epsilon,
    measure_epsilon_nonconvex,
    operator_matrix,
    oracle_energy_subset,
    ranked_coefficients,
)
from src.domain.value_objects.constraint_set import ConstraintSet
from src.domain.value_objects.inexact_operator import InexactKind, InexactOperator
from src.domain.value_objects.transform import Transform
from src.shared.exceptions import (
    ParameterException,
    UndefinedRatioException,
    UnsupportedOperationException,
    ValidationException,
)


@pytest.mark.unit
class TestApplyInexact:

    def test_identity_returns_input_object(self, rng):
        v = rng.standard_normal(7)
        assert apply_inexact(InexactOperator.identity(), v) is v

    def test_level_truncation_zeros_deeper_levels(self):
        out = apply_inexact(InexactOperator.level_truncation(2), np.arange(1.0, 8.0))
        np.testing.assert_array_equal(out, [1.0, 2.0, 3.0, 0.0, 0.0, 0.0, 0.0])

    def test_neighborhood_dominant_greedy_rule(self):
        v = np.array([0.0, 3.0, 1.0, 0.0, 0.0, 0.0, 2.0])
        out = apply_inexact(InexactOperator.neighborhood_dominant(5), v)
        np.testing.assert_array_equal(out, [0.0, 3.0, 0.0, 0.0, 0.0, 0.0, 2.0])

    def test_full_coefficient_subset_is_identity(self, rng, test_assertions):
        v = rng.standard_normal(8)
        p = InexactOperator.coefficient_subset(Transform.haar(8), range(8))
        test_assertions.assert_close(apply_inexact(p, v), v, atol=1e-12)

    def test_composed_basis_subset_is_projection(self, rng, test_assertions):
        basis = Transform.dct(4, 4)
        transform = Transform.composed(outer=Transform.haar(4, 4), inner=basis)
        p = InexactOperator.coefficient_subset(transform, range(6))
        v = rng.standard_normal(16)
        once = apply_inexact(p, v)
        test_assertions.assert_close(apply_inexact(p, once), once, atol=1e-12)

    def test_schedule_switches_stage(self):
        p = InexactOperator.growing_levels(start_levels=2, total_levels=4, every=3)
        assert p.active(0).levels == 2
        assert p.active(2).levels == 2
        assert p.active(3).levels == 3
        assert p.active(6).kind == InexactKind.IDENTITY
        assert p.active(100).kind == InexactKind.IDENTITY

    def test_schedule_validation(self):
        with pytest.raises(ValidationException):
            InexactOperator.scheduled([InexactOperator.identity()], [1])
        with pytest.raises(ParameterException):
            InexactOperator.growing_levels(2, 4, 0)

    def test_costs(self):
        assert inexact_cost(InexactOperator.identity(), 31) == 0
        assert inexact_cost(InexactOperator.level_truncation(2), 31) == 31


@pytest.mark.unit
class TestOperatorMatrix:

    def test_truncation_matrix_is_diagonal_mask(self):
        P = operator_matrix(InexactOperator.level_truncation(1), 7)
        np.testing.assert_array_equal(P, np.diag([1.0, 0, 0, 0, 0, 0, 0]))

    def test_nonlinear_operator_has_no_matrix(self):
        with pytest.raises(UnsupportedOperationException):
            operator_matrix(InexactOperator.neighborhood_dominant(3), 8)


@pytest.mark.unit
class TestModelError:

    def test_identity_has_zero_error(self, tree_signal):
        report = measure_epsilon(InexactOperator.identity(), ConstraintSet.k_sparse(31, 6), tree_signal.x)
        assert report.epsilon_convex == pytest.approx(0.0, abs=1e-15)
        assert report.epsilon_sufficient == 0.0

    def test_zero_signal_is_undefined(self):
        with pytest.raises(UndefinedRatioException):
            measure_epsilon(InexactOperator.identity(), ConstraintSet.l1_ball(3, 1.0), np.zeros(3))

    def test_nonconvex_identity_is_zero(self, tree_signal):
        value = measure_epsilon_nonconvex(InexactOperator.identity(), ConstraintSet.k_sparse(31, 6),
                                          tree_signal.x, probes=30, seed=0)
        assert value == pytest.approx(0.0, abs=1e-15)

    def test_nonconvex_needs_probes(self, tree_signal):
        with pytest.raises(ParameterException):
            measure_epsilon_nonconvex(InexactOperator.identity(), ConstraintSet.k_sparse(31, 6),
                                      tree_signal.x, probes=0, seed=0)

    @pytest.mark.parametrize("levels", [1, 2, 3, 4])
    def test_sampled_error_below_mask_bound(self, tree_signal, levels):
        p = InexactOperator.level_truncation(levels)
        sparse = ConstraintSet.k_sparse(31, 6)
        sampled = measure_epsilon_nonconvex(p, sparse, tree_signal.x, probes=60, seed=levels)
        upper = mask_epsilon_upper_bound(p, tree_signal.x)
        eliminated = measure_epsilon(p, sparse, tree_signal.x).epsilon_sufficient
        assert sampled <= upper + 1e-12
        assert upper <= 2.0 * eliminated + 1e-12

    def test_mask_bound_needs_coordinate_mask(self, tree_signal):
        p = InexactOperator.coefficient_subset(Transform.dct(31), range(4))
        with pytest.raises(UnsupportedOperationException):
            mask_epsilon_upper_bound(p, tree_signal.x)


@pytest.mark.unit
class TestOracleSubset:

    def test_smallest_leading_set(self):
        x = np.array([3.0, 4.0, 0.0])
        identity = Transform.identity(3)
        assert oracle_energy_subset(identity, x, 0.3) == (1,)
        assert oracle_energy_subset(identity, x, 0.5) == (1, 0)
        assert oracle_energy_subset(identity, x, 0.95) == (1, 0)
        np.testing.assert_array_equal(ranked_coefficients(identity, x), [1, 0, 2])

    def test_energy_fraction_meets_target(self, rng):
        basis = Transform.dct(8, 8)
        x = basis.analysis(np.cumsum(rng.standard_normal(64)))
        transform = Transform.composed(outer=Transform.haar(8, 8), inner=basis)
        subset = oracle_energy_subset(transform, x, 0.95)
        report = measure_epsilon(InexactOperator.coefficient_subset(transform, subset),
                                 ConstraintSet.l1_ball(64, float(np.abs(x).sum())), x)
        assert report.epsilon_sufficient <= 0.05 + 1e-12
        if len(subset) > 1:
            shorter = InexactOperator.coefficient_subset(transform, subset[:-1])
            assert measure_epsilon(shorter, ConstraintSet.l1_ball(64, 1e9), x).epsilon_sufficient > 0.05

    def test_invalid_fraction(self):
        with pytest.raises(ParameterException):
            oracle_energy_subset(Transform.identity(3), np.ones(3), 0.0)
