"""
Unit tests for widths, the l1 statistical dimension and restricted rates.
"""

from itertools import combinations
from math import log

import numpy as np
import pytest

from src.application.services.geometry_service import (
    gram_residual,
    maximal_supports,
    mean_width_monte_carlo,
    rho_alternating,
    rho_brute_force,
    statistical_dimension_l1,
    statistical_dimension_monte_carlo,
    support_count_estimate,
)
from src.application.services.signal_service import measurements_from_matrix
from src.application.services.solver_service import default_step_size
from src.domain.entities.signal_instance import SignalInstance
from src.domain.value_objects.estimates import ConeDescriptor, EstimateMethod
from src.domain.value_objects.inexact_operator import InexactOperator
from src.domain.value_objects.solver_config import StepPolicy
from src.shared.exceptions import (
    EnumerationTooLargeException,
    ParameterException,
    UnsupportedOperationException,
    ValidationException,
)
from src.shared.trial_runner import TrialRunner, TrialRunnerConfig
from tests.utils.test_helpers import NumericHelpers, ProjectionOracles


@pytest.mark.unit
class TestMeanWidth:

    def test_subspace_width_is_chi_mean(self, serial_runner):
        estimate = mean_width_monte_carlo(ConeDescriptor.subspace(16, [0, 3, 7, 9]), 4000, seed=1,
                                          runner=serial_runner)
        assert estimate.method == EstimateMethod.MONTE_CARLO
        assert estimate.samples == 4000
        assert abs(estimate.value - NumericHelpers.chi_mean(4)) < 4 * estimate.stderr

    def test_tree_width_below_sparse_width(self, serial_runner):
        tree = mean_width_monte_carlo(ConeDescriptor.tree_difference(31, 3), 2000, seed=5, runner=serial_runner)
        sparse = mean_width_monte_carlo(ConeDescriptor.sparse_difference(31, 3), 2000, seed=5, runner=serial_runner)
        assert tree.value <= sparse.value
        assert tree.is_upper_bound and not sparse.is_upper_bound

    def test_width_grows_with_k(self, serial_runner):
        small = mean_width_monte_carlo(ConeDescriptor.sparse_difference(64, 1), 1000, seed=2, runner=serial_runner)
        large = mean_width_monte_carlo(ConeDescriptor.sparse_difference(64, 4), 1000, seed=2, runner=serial_runner)
        assert large.value > small.value

    def test_independent_of_worker_count(self, serial_runner):
        cone = ConeDescriptor.sparse_difference(32, 2)
        pooled = TrialRunner(TrialRunnerConfig(max_workers=3, enable_memory_monitoring=False))
        a = mean_width_monte_carlo(cone, 2500, seed=9, runner=serial_runner)
        b = mean_width_monte_carlo(cone, 2500, seed=9, runner=pooled)
        assert a.value == b.value
        assert a.stderr == b.stderr

    def test_descent_cone_has_its_own_estimator(self):
        with pytest.raises(UnsupportedOperationException):
            mean_width_monte_carlo(ConeDescriptor.l1_descent_cone(np.ones(4)), 100, seed=0)

    def test_needs_two_samples(self):
        with pytest.raises(ParameterException):
            mean_width_monte_carlo(ConeDescriptor.sparse_difference(8, 1), 1, seed=0)


@pytest.mark.unit
class TestStatisticalDimension:

    def test_within_factor_of_asymptotic_form(self):
        x = np.zeros(128)
        x[:4] = 1.0
        estimate = statistical_dimension_l1(x)
        reference = 2 * 4 * log(128 / 4)
        ratio = estimate.value ** 2 / reference
        assert 0.6 <= ratio <= 1.5, f"statistical dimension {estimate.value ** 2:.4f} is {ratio:.3f} x 2k log(d/k)"
        # the closed form sits below the asymptotic 2k log(d/k) at this size
        assert ratio == pytest.approx(0.67, abs=0.01), f"ratio {ratio:.4f}"
        assert estimate.is_upper_bound

    def test_bounds_the_sampled_value(self):
        x = np.array([1.0, -2.0, 0, 0, 0, 0, 0, 0])
        closed = statistical_dimension_l1(x)
        sampled = statistical_dimension_monte_carlo(x, 4000, seed=3)
        assert sampled.value ** 2 <= closed.value ** 2 + 3 * sampled.stderr
        assert sampled.value ** 2 >= 1.0

    def test_dense_signal_fills_the_space(self):
        assert statistical_dimension_l1(np.ones(9)).value == pytest.approx(3.0)

    def test_zero_signal_rejected(self):
        with pytest.raises(ValidationException):
            statistical_dimension_l1(np.zeros(5))


@pytest.mark.unit
class TestRestrictedRates:

    def test_gram_residual_through_truncation(self, rng):
        model = measurements_from_matrix(SignalInstance.custom(np.ones(7)), rng.standard_normal((4, 7)))
        G = gram_residual(model, 0.1, InexactOperator.level_truncation(2))
        assert np.all(G[3:, :] == 0) and np.all(G[:, 3:] == 0)
        np.testing.assert_allclose(G[:3, :3], (np.eye(7) - 0.1 * model.matrix.T @ model.matrix)[:3, :3])

    def test_subspace_rate_is_block_norm(self, small_gaussian_model):
        mu = default_step_size(small_gaussian_model, StepPolicy.LIPSCHITZ)
        cone = ConeDescriptor.subspace(8, [1, 4, 6])
        estimate = rho_brute_force(small_gaussian_model, cone, mu)
        G = gram_residual(small_gaussian_model, mu)
        assert estimate.value == pytest.approx(np.linalg.norm(G[np.ix_([1, 4, 6], [1, 4, 6])], 2))
        assert estimate.kappa == 1 and not estimate.is_lower_bound

    def test_sparse_rate_matches_pair_enumeration(self, small_gaussian_model):
        mu = default_step_size(small_gaussian_model, StepPolicy.LIPSCHITZ)
        estimate = rho_brute_force(small_gaussian_model, ConeDescriptor.sparse_difference(8, 1), mu)
        G = gram_residual(small_gaussian_model, mu)
        expected = ProjectionOracles.max_pair_norm(G, list(combinations(range(8), 2)))
        assert estimate.value == pytest.approx(expected, rel=1e-10)
        assert estimate.evaluated == 28 * 28
        assert estimate.kappa == 2

    def test_alternating_is_a_lower_bound(self, small_gaussian_model):
        mu = default_step_size(small_gaussian_model, StepPolicy.LIPSCHITZ)
        cone = ConeDescriptor.sparse_difference(8, 1)
        exact = rho_brute_force(small_gaussian_model, cone, mu)
        approx = rho_alternating(small_gaussian_model, cone, mu, restarts=10, seed=4)
        assert approx.is_lower_bound
        assert 0 < approx.value <= exact.value + 1e-10

    @pytest.mark.parametrize("levels", [None, 1, 2])
    def test_alternating_matches_enumeration_on_small_tree(self, rng, levels):
        # every maximal support of tree-difference(7, 2) lies inside {0, 1, 2}
        model = measurements_from_matrix(SignalInstance.custom(rng.standard_normal(7)), rng.standard_normal((4, 7)))
        mu = default_step_size(model, StepPolicy.LIPSCHITZ)
        cone = ConeDescriptor.tree_difference(7, 2)
        p = None if levels is None else InexactOperator.level_truncation(levels)
        exact = rho_brute_force(model, cone, mu, inexact=p)
        approx = rho_alternating(model, cone, mu, restarts=5, seed=1, inexact=p)
        assert abs(approx.value - exact.value) <= 1e-6

    def test_alternating_matches_enumeration_on_subspace(self, small_gaussian_model):
        mu = default_step_size(small_gaussian_model, StepPolicy.LIPSCHITZ)
        cone = ConeDescriptor.subspace(8, [0, 3, 5, 7])
        exact = rho_brute_force(small_gaussian_model, cone, mu)
        approx = rho_alternating(small_gaussian_model, cone, mu, restarts=3, seed=2)
        assert abs(approx.value - exact.value) <= 1e-6

    @pytest.mark.parametrize("levels", [1, 2, 3])
    def test_truncation_never_raises_the_rate(self, rng, levels):
        model = measurements_from_matrix(SignalInstance.custom(rng.standard_normal(15)), rng.standard_normal((9, 15)))
        mu = default_step_size(model, StepPolicy.LIPSCHITZ)
        for cone in (ConeDescriptor.tree_difference(15, 3), ConeDescriptor.sparse_difference(15, 1)):
            rho = rho_brute_force(model, cone, mu).value
            rho_p = rho_brute_force(model, cone, mu, inexact=InexactOperator.level_truncation(levels)).value
            assert rho_p <= rho + 1e-12

    def test_alternating_on_descent_cone(self, small_gaussian_model):
        mu = default_step_size(small_gaussian_model, StepPolicy.LIPSCHITZ)
        cone = ConeDescriptor.l1_descent_cone(small_gaussian_model.x)
        estimate = rho_alternating(small_gaussian_model, cone, mu, restarts=5, seed=0)
        G = gram_residual(small_gaussian_model, mu)
        assert 0 <= estimate.value <= np.linalg.norm(G, 2) + 1e-10

    def test_alternating_needs_linear_operator(self, small_gaussian_model):
        with pytest.raises(UnsupportedOperationException):
            rho_alternating(small_gaussian_model, ConeDescriptor.sparse_difference(8, 1), 0.1, 1, 0,
                            inexact=InexactOperator.neighborhood_dominant(2))

    def test_tree_supports_are_unions_of_subtrees(self):
        assert maximal_supports(ConeDescriptor.tree_difference(7, 2)) == [(0, 1), (0, 2), (0, 1, 2)]
        assert support_count_estimate(ConeDescriptor.tree_difference(7, 2)) == 4

    def test_enumeration_limit(self):
        cone = ConeDescriptor.sparse_difference(128, 8)
        with pytest.raises(EnumerationTooLargeException):
            maximal_supports(cone)
        assert support_count_estimate(cone) > 10 ** 6

    def test_cone_must_match_model(self, small_gaussian_model):
        with pytest.raises(ValidationException):
            rho_brute_force(small_gaussian_model, ConeDescriptor.sparse_difference(9, 1), 0.1)
