"""
Unit tests for PGD, ISTA, inexact PGD and the shared iteration loop.
"""

from math import sqrt

import numpy as np
import pytest

from src.application.services.solver_service import (
    default_step_size,
    evaluate_objective,
    run_ipgd,
    run_ista,
    run_pgd,
    run_solver,
    solver_config,
    step_operators,
)
from src.domain.entities.measurement_model import MeasurementModel
from src.domain.entities.signal_instance import SignalInstance
from src.application.services.signal_service import measurements_from_matrix
from src.domain.value_objects.constraint_set import ConstraintSet
from src.domain.value_objects.inexact_operator import InexactOperator
from src.domain.value_objects.solver_config import Algorithm, SolverConfig, StepPolicy
from src.shared.exceptions import DimensionMismatchException, ParameterException, ValidationException


def _scalar_model(x: float):
    return measurements_from_matrix(SignalInstance.custom([x]), np.array([[1.0]]))


@pytest.mark.unit
class TestStepOperators:

    def test_affine_parts(self, rng, test_assertions):
        M = rng.standard_normal((3, 5))
        A, U = step_operators(M, 0.1)
        test_assertions.assert_close(A, 0.1 * M.T)
        test_assertions.assert_close(U, np.eye(5) - 0.1 * M.T @ M)

    def test_step_policies(self, gaussian_model):
        assert default_step_size(gaussian_model) == pytest.approx(1.0 / (sqrt(20) + sqrt(40)) ** 2)
        assert default_step_size(gaussian_model, StepPolicy.AGGRESSIVE) == pytest.approx(1.0 / 40)
        lipschitz = default_step_size(gaussian_model, "lipschitz")
        assert lipschitz == pytest.approx(1.0 / np.linalg.norm(gaussian_model.matrix, 2) ** 2)

    def test_step_size_constants(self):
        wide = measurements_from_matrix(SignalInstance.custom(np.ones(127)), np.zeros((50, 127)))
        assert default_step_size(wide) == pytest.approx(1.0 / (sqrt(127) + sqrt(50)) ** 2)
        assert default_step_size(wide) == pytest.approx(0.003, abs=5e-5)
        tall = measurements_from_matrix(SignalInstance.custom(np.ones(10)), np.zeros((100, 10)))
        assert default_step_size(tall, StepPolicy.AGGRESSIVE) == pytest.approx(0.01)

    def test_objective(self, gaussian_model, sparse_signal):
        assert evaluate_objective(sparse_signal.x, gaussian_model, 0.5) == pytest.approx(
            0.5 * np.abs(sparse_signal.x).sum()
        )
        with pytest.raises(DimensionMismatchException):
            evaluate_objective(np.zeros(3), gaussian_model, 0.0)


@pytest.mark.unit
class TestSolverConfig:

    def test_pgd_needs_constraint(self):
        with pytest.raises(ValidationException):
            SolverConfig(algorithm=Algorithm.PGD, step_size=0.1, max_iterations=5)

    def test_ipgd_needs_operator(self):
        with pytest.raises(ValidationException):
            SolverConfig(algorithm=Algorithm.IPGD, step_size=0.1, max_iterations=5,
                         constraint=ConstraintSet.k_sparse(4, 1))

    @pytest.mark.parametrize("field,value", [("step_size", 0.0), ("max_iterations", -1), ("lam", -1.0)])
    def test_invalid_parameters(self, field, value):
        kwargs = {"algorithm": Algorithm.ISTA, "step_size": 0.1, "max_iterations": 5, field: value}
        with pytest.raises(ParameterException):
            SolverConfig(**kwargs)

    def test_wrong_algorithm_for_runner(self, gaussian_model):
        config = solver_config(Algorithm.ISTA, 0.01, 3, lam=0.1)
        with pytest.raises(ValidationException):
            run_pgd(gaussian_model, config)


@pytest.mark.unit
class TestPgd:

    def test_identity_matrix_projects_y_in_one_step(self, sparse_signal, test_assertions):
        model = measurements_from_matrix(sparse_signal, np.eye(20))
        config = solver_config(Algorithm.PGD, 1.0, 1, constraint=ConstraintSet.k_sparse(20, 3))
        trace = run_pgd(model, config)
        test_assertions.assert_close(trace.final_iterate, sparse_signal.x)
        assert trace.errors()[-1] == pytest.approx(0.0, abs=1e-12)

    def test_recovers_signal_on_l1_ball(self, gaussian_model, sparse_signal):
        mu = default_step_size(gaussian_model, StepPolicy.LIPSCHITZ)
        radius = float(np.abs(sparse_signal.x).sum())
        config = solver_config(Algorithm.PGD, mu, 1500, constraint=ConstraintSet.l1_ball(20, radius))
        trace = run_pgd(gaussian_model, config)
        assert trace.relative_errors()[-1] < 1e-4
        assert trace.relative_errors()[0] == pytest.approx(1.0)

    def test_trace_layout(self, gaussian_model):
        config = solver_config(Algorithm.PGD, 0.01, 12, constraint=ConstraintSet.k_sparse(20, 3), store_every=5)
        trace = run_pgd(gaussian_model, config)
        assert trace.iterations == 12
        assert [r.t for r in trace.records] == list(range(13))
        assert sorted(trace.iterates) == [0, 5, 10, 12]
        assert trace.records[0].operations == 0
        assert all(r.operations > 0 for r in trace.records[1:])
        assert np.all(np.diff(trace.seconds()) >= 0)
        assert set(trace.to_rows()[0]) == {"t", "err", "objective", "seconds", "operations"}

    def test_initial_point_must_match(self, gaussian_model):
        config = solver_config(Algorithm.PGD, 0.01, 2, constraint=ConstraintSet.k_sparse(20, 3),
                               initial=np.zeros(5))
        with pytest.raises(DimensionMismatchException):
            run_pgd(gaussian_model, config)

    def test_unknown_signal_gives_nan_errors(self, gaussian_model):
        model = measurements_from_matrix(SignalInstance.custom(np.zeros(20)), gaussian_model.matrix)
        blind = MeasurementModel(matrix=model.matrix, noise=model.noise, y=gaussian_model.y, ensemble=model.ensemble)
        trace = run_pgd(blind, solver_config(Algorithm.PGD, 0.01, 3, constraint=ConstraintSet.k_sparse(20, 3)))
        assert np.all(np.isnan(trace.errors()))


@pytest.mark.unit
class TestIpgd:

    def test_identity_operator_reproduces_pgd_exactly(self, gaussian_model):
        constraint = ConstraintSet.k_sparse(20, 3)
        pgd = run_pgd(gaussian_model, solver_config(Algorithm.PGD, 0.01, 40, constraint=constraint))
        ipgd = run_ipgd(gaussian_model, solver_config(Algorithm.IPGD, 0.01, 40, constraint=constraint,
                                                      inexact=InexactOperator.identity()))
        np.testing.assert_array_equal(pgd.errors(), ipgd.errors())
        np.testing.assert_array_equal(pgd.objectives(), ipgd.objectives())
        np.testing.assert_array_equal(pgd.operations(), ipgd.operations())

    def test_nonlinear_operator_runs(self, gaussian_model):
        config = solver_config(Algorithm.IPGD, 0.01, 30, constraint=ConstraintSet.k_sparse(20, 3),
                               inexact=InexactOperator.neighborhood_dominant(2))
        trace = run_ipgd(gaussian_model, config)
        assert trace.iterations == 30
        assert np.all(np.isfinite(trace.errors()))
        assert np.count_nonzero(trace.final_iterate) <= 3

    def test_scheduled_operator_ends_like_pgd(self, tree_signal):
        model = measurements_from_matrix(tree_signal, np.eye(31))
        constraint = ConstraintSet.tree_sparse(31, 6)
        p = InexactOperator.growing_levels(start_levels=1, total_levels=5, every=1)
        trace = run_ipgd(model, solver_config(Algorithm.IPGD, 1.0, 6, constraint=constraint, inexact=p))
        # with M = I and mu = 1 every step projects p_t(y); the last stage keeps every level
        assert trace.errors()[-1] == pytest.approx(0.0, abs=1e-12)

    def test_run_solver_dispatch(self, gaussian_model):
        config = solver_config(Algorithm.IPGD, 0.01, 2, constraint=ConstraintSet.k_sparse(20, 3),
                               inexact=InexactOperator.identity())
        assert run_solver(gaussian_model, config).algorithm == "ipgd"
        with pytest.raises(ValidationException):
            run_solver(gaussian_model, SolverConfig(algorithm=Algorithm.UNROLLED, step_size=1.0, max_iterations=1))


@pytest.mark.unit
class TestIsta:

    def test_scalar_fixed_point(self):
        # z <- S_{mu lam}(z + mu (y - z)) settles at y - lam
        trace = run_ista(_scalar_model(2.0), solver_config(Algorithm.ISTA, 0.5, 80, lam=1.0))
        assert trace.final_iterate[0] == pytest.approx(1.0, abs=1e-12)

    def test_large_lambda_gives_zero(self):
        trace = run_ista(_scalar_model(2.0), solver_config(Algorithm.ISTA, 0.5, 10, lam=5.0))
        assert trace.final_iterate[0] == 0.0

    def test_objective_tracks_lambda(self, gaussian_model):
        trace = run_ista(gaussian_model, solver_config(Algorithm.ISTA, 0.005, 5, lam=0.3))
        z = trace.final_iterate
        assert trace.objectives()[-1] == pytest.approx(evaluate_objective(z, gaussian_model, 0.3))

    def test_large_step_is_reported(self, gaussian_model, caplog):
        with caplog.at_level("WARNING"):
            run_ista(gaussian_model, solver_config(Algorithm.ISTA, 10.0, 1, lam=0.1))
        assert "violates" in caplog.text

    @pytest.mark.parametrize("lam", [0.05, 0.3, 1.0])
    def test_descends_under_step_bound(self, gaussian_model, lam, test_assertions):
        M, y = gaussian_model.matrix, gaussian_model.y
        mu = 1.0 / float(np.linalg.norm(M, 2)) ** 2
        trace = run_ista(gaussian_model, solver_config(Algorithm.ISTA, mu, 60, lam=lam, store_every=1))
        assert sorted(trace.iterates) == list(range(61))
        # threshold mu*lam majorizes 1/2 ||y - Mz||^2 + lam ||z||_1
        descended = [0.5 * float(np.sum((y - M @ z) ** 2)) + lam * float(np.abs(z).sum())
                     for _, z in sorted(trace.iterates.items())]
        test_assertions.assert_monotone_nonincreasing(descended, tolerance=1e-10)

    def test_recorded_objective_non_increasing_without_penalty(self, gaussian_model, test_assertions):
        mu = 1.0 / float(np.linalg.norm(gaussian_model.matrix, 2)) ** 2
        trace = run_ista(gaussian_model, solver_config(Algorithm.ISTA, mu, 60, lam=0.0))
        test_assertions.assert_monotone_nonincreasing(trace.objectives(), tolerance=1e-10)
