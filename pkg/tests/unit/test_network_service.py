"""
Unit tests for unrolled network forward passes, gradients and losses.
"""

import numpy as np
import pytest

from src.application.services.network_service import (
    backward,
    forward,
    forward_batch,
    initialize_from_solver,
    layer_objectives,
    loss_and_gradient,
)
from src.application.services.solver_service import run_ista, run_pgd, run_unrolled, solver_config
from src.application.services.training_service import default_network
from src.domain.entities.unrolled_network import Nonlinearity, UnrolledNetwork
from src.domain.value_objects.constraint_set import ConstraintSet
from src.domain.value_objects.solver_config import Algorithm
from src.domain.value_objects.training_config import TrainingObjective
from src.shared.exceptions import DimensionMismatchException, ParameterException, ValidationException
from tests.utils.test_helpers import NumericHelpers

KINK_MARGIN = 1e-3


def _random_network(seed: int, nonlinearity: Nonlinearity, d: int = 8, m: int = 5, layers: int = 3):
    rng = np.random.default_rng(seed)
    network = UnrolledNetwork(
        A=0.5 * rng.standard_normal((d, m)),
        U=0.3 * rng.standard_normal((d, d)),
        nonlinearity=nonlinearity,
        layers=layers,
        lam=0.1 if nonlinearity == Nonlinearity.SOFT_THRESHOLD else 0.0,
        k=3 if nonlinearity == Nonlinearity.HARD_TOP_K else None,
        radius=1.0 if nonlinearity == Nonlinearity.L1_BALL else None,
    )
    Y = rng.standard_normal((4, m))
    targets = rng.standard_normal((4, d))
    return network, Y, targets


def _kink_distance(network: UnrolledNetwork, Y: np.ndarray) -> float:
    """Smallest distance of any pre-activation from a point where the nonlinearity is not smooth."""
    cache = forward_batch(network, Y)
    if network.nonlinearity == Nonlinearity.SOFT_THRESHOLD:
        return min(float(np.min(np.abs(np.abs(V) - network.lam))) for V in cache.pre_activations)
    gaps = []
    for V in cache.pre_activations:
        ordered = -np.sort(-np.abs(V), axis=1)
        gaps.append(float(np.min(ordered[:, network.k - 1] - ordered[:, network.k])))
    return min(gaps)


def _smooth_instance(nonlinearity: Nonlinearity):
    for seed in range(200):
        network, Y, targets = _random_network(seed, nonlinearity)
        if _kink_distance(network, Y) > KINK_MARGIN:
            return network, Y, targets
    raise AssertionError("No instance away from the kinks")


@pytest.mark.unit
class TestForward:

    def test_ista_network_reproduces_ista(self, gaussian_model):
        mu, lam, T = 0.005, 0.3, 12
        network = initialize_from_solver(gaussian_model.matrix, mu, T, Nonlinearity.SOFT_THRESHOLD, lam=lam)
        z, outputs = forward(network, gaussian_model.y)
        trace = run_ista(gaussian_model, solver_config(Algorithm.ISTA, mu, T, lam=lam))
        np.testing.assert_array_equal(z, trace.final_iterate)
        assert len(outputs) == T
        np.testing.assert_array_equal(run_unrolled(gaussian_model, network).final_iterate, z)

    def test_top_k_network_reproduces_iht(self, gaussian_model):
        network = initialize_from_solver(gaussian_model.matrix, 0.01, 10, Nonlinearity.HARD_TOP_K, k=3)
        trace = run_pgd(gaussian_model, solver_config(Algorithm.PGD, 0.01, 10,
                                                      constraint=ConstraintSet.k_sparse(20, 3)))
        np.testing.assert_allclose(forward(network, gaussian_model.y)[0], trace.final_iterate, atol=1e-12)

    @pytest.mark.parametrize("nonlinearity", list(Nonlinearity))
    def test_batch_matches_rows(self, nonlinearity, test_assertions):
        network, Y, _ = _random_network(3, nonlinearity)
        cache = forward_batch(network, Y)
        assert len(cache.outputs) == network.layers + 1
        assert len(cache.pre_activations) == network.layers
        np.testing.assert_array_equal(cache.outputs[0], np.zeros((4, 8)))
        for row in range(Y.shape[0]):
            test_assertions.assert_close(cache.final[row], forward(network, Y[row])[0], atol=1e-12)

    def test_measurement_must_match(self):
        network, _, _ = _random_network(0, Nonlinearity.SOFT_THRESHOLD)
        with pytest.raises(DimensionMismatchException):
            forward(network, np.ones(4))

    def test_layer_objectives_decrease_for_ista_initialisation(self, rng, test_assertions):
        M = rng.standard_normal((10, 20)) / np.sqrt(10)
        Y = rng.standard_normal((6, 10))
        objectives = layer_objectives(default_network(M, 8, 0.2), Y, M, 0.2)
        assert objectives.shape == (9,)
        test_assertions.assert_monotone_nonincreasing(objectives, tolerance=1e-10)


@pytest.mark.unit
class TestNetworkValidation:

    def test_top_k_needs_k(self):
        with pytest.raises(ParameterException):
            UnrolledNetwork(A=np.ones((3, 2)), U=np.eye(3), nonlinearity=Nonlinearity.HARD_TOP_K, layers=1)

    def test_u_must_be_square(self):
        with pytest.raises(DimensionMismatchException):
            UnrolledNetwork(A=np.ones((3, 2)), U=np.eye(2), nonlinearity=Nonlinearity.SOFT_THRESHOLD, layers=1)

    def test_copy_is_independent(self):
        network, _, _ = _random_network(1, Nonlinearity.SOFT_THRESHOLD)
        clone = network.copy()
        clone.A[0, 0] += 1.0
        assert network.A[0, 0] != clone.A[0, 0]


@pytest.mark.unit
class TestGradients:

    @pytest.mark.parametrize("nonlinearity", [Nonlinearity.SOFT_THRESHOLD, Nonlinearity.HARD_TOP_K])
    @pytest.mark.parametrize("objective", list(TrainingObjective))
    def test_matches_central_differences(self, nonlinearity, objective):
        network, Y, targets = _smooth_instance(nonlinearity)
        M = np.random.default_rng(99).standard_normal((5, 8))

        def loss() -> float:
            cache = forward_batch(network, Y)
            return loss_and_gradient(objective, cache.final, targets, Y, M, 0.1)[0]

        cache = forward_batch(network, Y)
        _, output_gradient = loss_and_gradient(objective, cache.final, targets, Y, M, 0.1)
        grads = backward(network, cache, output_gradient)

        for name, analytic in (("A", grads.A), ("U", grads.U)):
            array = getattr(network, name)
            for index in [(0, 0), (2, 1), (5, 3), (7, 4)]:
                numeric = NumericHelpers.finite_difference(loss, array, index, step=1e-5)
                assert analytic[index] == pytest.approx(numeric, rel=1e-4, abs=1e-7), f"{name}{index}"

        if nonlinearity == Nonlinearity.SOFT_THRESHOLD:
            original = network.lam
            network.lam = original + 1e-5
            plus = loss()
            network.lam = original - 1e-5
            minus = loss()
            network.lam = original
            assert grads.lam == pytest.approx((plus - minus) / 2e-5, rel=1e-4, abs=1e-7)
        else:
            assert grads.lam == 0.0

    def test_direct_objective_output_gradient(self, rng):
        Z = rng.standard_normal((3, 6))
        Y = rng.standard_normal((3, 4))
        M = rng.standard_normal((4, 6))
        _, gradient = loss_and_gradient(TrainingObjective.DIRECT_OBJECTIVE, Z, Z, Y, M, 0.2)

        def loss() -> float:
            return loss_and_gradient(TrainingObjective.DIRECT_OBJECTIVE, Z, Z, Y, M, 0.2)[0]

        for index in [(0, 0), (1, 3), (2, 5)]:
            assert gradient[index] == pytest.approx(NumericHelpers.finite_difference(loss, Z, index), rel=1e-5)

    def test_supervised_loss_value(self):
        loss, gradient = loss_and_gradient(TrainingObjective.SUPERVISED_L2, np.ones((2, 2)), np.zeros((2, 2)),
                                           np.zeros((2, 1)), np.zeros((1, 2)), 0.0)
        assert loss == pytest.approx(1.0)
        np.testing.assert_allclose(gradient, np.full((2, 2), 0.5))

    def test_backward_needs_forward_cache(self):
        network, Y, _ = _random_network(0, Nonlinearity.SOFT_THRESHOLD)
        cache = forward_batch(network, Y)
        with pytest.raises(DimensionMismatchException):
            backward(network, cache, np.zeros((2, 8)))
        cache.pre_activations.clear()
        with pytest.raises(ValidationException):
            backward(network, cache, np.zeros((4, 8)))
