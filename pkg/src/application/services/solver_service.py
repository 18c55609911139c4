"""
Iterative solvers for y = M x + e: PGD, ISTA, inexact PGD and the unrolled
learned iteration, with step-size policies and convergence traces.

All solvers evaluate the gradient step as b + U z with b = A y, A = mu M' and
U = I - mu M'M built once by `affine_step_operators`. An unrolled network
initialised with the same (A, U) therefore reproduces the solver arithmetic
exactly. Linear inexact operators are applied to the whole step p(b + U z),
which equals p(z) + mu p(M'(y - M z)) by linearity.
"""
import logging
import time
from math import log2, sqrt
from typing import Callable, Optional

import numpy as np

from src.domain.entities.convergence_trace import ConvergenceTrace
from src.domain.entities.measurement_model import MeasurementModel
from src.domain.entities.unrolled_network import Nonlinearity, UnrolledNetwork
from src.domain.value_objects.solver_config import Algorithm, SolverConfig, StepPolicy
from src.shared.config.settings import get_settings
from src.shared.exceptions import DimensionMismatchException, ParameterException, ValidationException

from .inexact_projection_service import apply_inexact, inexact_cost
from .projection_service import (
    project,
    project_k_sparse,
    project_l1_ball,
    projection_cost,
    proximal_l1,
)

logger = logging.getLogger(__name__)

Step = Callable[[np.ndarray, int], tuple[np.ndarray, int]]


def affine_step_operators(model: MeasurementModel, step_size: float) -> tuple[np.ndarray, np.ndarray]:
    """(A, U) = (mu M', I - mu M'M)."""
    return step_operators(model.matrix, step_size)


def step_operators(M: np.ndarray, step_size: float) -> tuple[np.ndarray, np.ndarray]:
    A = step_size * M.T
    U = np.eye(M.shape[1]) - step_size * (M.T @ M)
    return A, U


def default_step_size(model: MeasurementModel, policy: StepPolicy = StepPolicy.CONSERVATIVE) -> float:
    """conservative: 1/(sqrt(d)+sqrt(m))^2, aggressive: 1/m, lipschitz: 1/||M||^2."""
    policy = StepPolicy(policy)
    if policy == StepPolicy.CONSERVATIVE:
        return 1.0 / (sqrt(model.d) + sqrt(model.m)) ** 2
    if policy == StepPolicy.AGGRESSIVE:
        return 1.0 / model.m
    return 1.0 / float(np.linalg.norm(model.matrix, 2)) ** 2


def evaluate_objective(z: np.ndarray, model: MeasurementModel, lam: float) -> float:
    """||y - M z||^2 + lam ||z||_1."""
    z = np.asarray(z, dtype=float)
    if z.shape != (model.d,):
        raise DimensionMismatchException("Estimate does not match M", expected=model.d, actual=z.shape)
    residual = model.y - model.matrix @ z
    return float(residual @ residual) + lam * float(np.abs(z).sum())


def run_pgd(model: MeasurementModel, config: SolverConfig) -> ConvergenceTrace:
    """z_{t+1} = P_K(z_t + mu M'(y - M z_t))."""
    _expect(config, Algorithm.PGD)
    b, U = _affine_parts(model, config)
    constraint = config.constraint
    gradient_cost = _gradient_cost(model)

    def step(z: np.ndarray, t: int) -> tuple[np.ndarray, int]:
        v = b + U @ z
        return project(constraint, v), gradient_cost + projection_cost(constraint, v)

    return _iterate(model, config, step, lam=0.0)


def run_ista(model: MeasurementModel, config: SolverConfig) -> ConvergenceTrace:
    """z_{t+1} = S_{mu lam}(z_t + mu M'(y - M z_t))."""
    _expect(config, Algorithm.ISTA)
    _check_ista_step(model, config.step_size)
    b, U = _affine_parts(model, config)
    threshold = config.step_size * config.lam
    cost = _gradient_cost(model) + model.d

    def step(z: np.ndarray, t: int) -> tuple[np.ndarray, int]:
        return proximal_l1(b + U @ z, threshold), cost

    return _iterate(model, config, step, lam=config.lam)


def run_ipgd(model: MeasurementModel, config: SolverConfig) -> ConvergenceTrace:
    """z_{t+1} = P_K(p(z_t) + mu p(M'(y - M z_t))), p consulted at iteration t."""
    _expect(config, Algorithm.IPGD)
    constraint = config.constraint
    p = config.inexact
    gradient_cost = _gradient_cost(model)

    if p.linear:
        b, U = _affine_parts(model, config)

        def step(z: np.ndarray, t: int) -> tuple[np.ndarray, int]:
            v = apply_inexact(p, b + U @ z, t)
            return project(constraint, v), gradient_cost + inexact_cost(p, model.d, t) + projection_cost(constraint, v)
    else:
        M, y, mu = model.matrix, model.y, config.step_size

        def step(z: np.ndarray, t: int) -> tuple[np.ndarray, int]:
            v = apply_inexact(p, z, t) + mu * apply_inexact(p, M.T @ (y - M @ z), t)
            cost = gradient_cost + 2 * inexact_cost(p, model.d, t) + projection_cost(constraint, v)
            return project(constraint, v), cost

    return _iterate(model, config, step, lam=0.0)


def run_unrolled(model: MeasurementModel, network: UnrolledNetwork, lam: float = 0.0,
                 label: str = "unrolled") -> ConvergenceTrace:
    """z_{t+1} = phi(A y + U z_t) for the network's T layers."""
    if network.A.shape != (model.d, model.m):
        raise DimensionMismatchException("Network does not match M", expected=(model.d, model.m),
                                         actual=network.A.shape)
    c = network.A @ model.y
    U = network.U
    cost = _gradient_cost(model) + int(model.d * max(1.0, log2(model.d)))

    def step(z: np.ndarray, t: int) -> tuple[np.ndarray, int]:
        return apply_nonlinearity(network, c + U @ z), cost

    config = SolverConfig(
        algorithm=Algorithm.UNROLLED,
        step_size=1.0,
        max_iterations=network.layers,
        store_every=get_settings().TRACE_STORE_EVERY,
        label=label,
    )
    return _iterate(model, config, step, lam=lam)


def run_solver(model: MeasurementModel, config: SolverConfig) -> ConvergenceTrace:
    if config.algorithm == Algorithm.PGD:
        return run_pgd(model, config)
    if config.algorithm == Algorithm.ISTA:
        return run_ista(model, config)
    if config.algorithm == Algorithm.IPGD:
        return run_ipgd(model, config)
    raise ValidationException("Unrolled runs need a network, use run_unrolled", field="algorithm")


def apply_nonlinearity(network: UnrolledNetwork, v: np.ndarray) -> np.ndarray:
    if network.nonlinearity == Nonlinearity.SOFT_THRESHOLD:
        return proximal_l1(v, network.lam)
    if network.nonlinearity == Nonlinearity.HARD_TOP_K:
        return project_k_sparse(v, network.k)
    return project_l1_ball(v, network.radius)


def _iterate(model: MeasurementModel, config: SolverConfig, step: Step, lam: float) -> ConvergenceTrace:
    x = model.x
    trace = ConvergenceTrace(
        algorithm=config.algorithm.value,
        label=config.name,
        norm_x=None if x is None else float(np.linalg.norm(x)),
    )
    z = np.zeros(model.d) if config.initial is None else np.array(config.initial, dtype=float)
    if z.shape != (model.d,):
        raise DimensionMismatchException("Initial point does not match M", expected=model.d, actual=z.shape)

    T = config.max_iterations
    every = config.store_every
    elapsed = 0.0
    trace.record(0, z, evaluate_objective(z, model, lam), 0.0, 0, x, store=True)
    for t in range(T):
        start = time.perf_counter()
        z, operations = step(z, t)
        elapsed += time.perf_counter() - start
        store = (t + 1) % every == 0 or t + 1 == T
        trace.record(t + 1, z, evaluate_objective(z, model, lam), elapsed, operations, x, store=store)

    logger.debug(f"{trace.label}: {T} iterations in {elapsed:.4f}s")
    return trace


def _affine_parts(model: MeasurementModel, config: SolverConfig) -> tuple[np.ndarray, np.ndarray]:
    A, U = affine_step_operators(model, config.step_size)
    return A @ model.y, U


def _gradient_cost(model: MeasurementModel) -> int:
    return 2 * model.m * model.d


def _expect(config: SolverConfig, algorithm: Algorithm) -> None:
    if config.algorithm != algorithm:
        raise ValidationException(
            f"Expected a {algorithm.value} configuration", field="algorithm", value=config.algorithm.value
        )


def _check_ista_step(model: MeasurementModel, step_size: float) -> None:
    if not get_settings().ISTA_STEP_WARNING:
        return
    norm = float(np.linalg.norm(model.matrix, 2))
    if 1.0 / step_size < norm:
        logger.warning(f"ISTA step size {step_size:.4g} violates 1/mu >= ||M|| = {norm:.4g}")


def solver_config(
    algorithm: Algorithm,
    step_size: float,
    max_iterations: int,
    **kwargs,
) -> SolverConfig:
    """SolverConfig with the storage stride taken from settings unless given."""
    if step_size is None:
        raise ParameterException("Step size is required", parameter="step_size")
    kwargs.setdefault("store_every", get_settings().TRACE_STORE_EVERY)
    return SolverConfig(algorithm=algorithm, step_size=step_size, max_iterations=max_iterations, **kwargs)
