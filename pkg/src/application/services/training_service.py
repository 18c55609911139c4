"""
Training of unrolled networks and of the mixture of networks.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from src.domain.entities.sparse_coding_dataset import SparseCodingDataset
from src.domain.entities.unrolled_network import MixtureModel, Nonlinearity, UnrolledNetwork
from src.domain.value_objects.training_config import TrainingConfig
from src.shared.exceptions import (
    ApplicationException,
    ErrorCode,
    ParameterException,
    TrainingDivergenceException,
)
from src.shared.trial_runner import derive_seed
from src.shared.utils.timing_decorator import timed

from .network_service import (
    backward,
    forward_batch,
    initialize_from_solver,
    loss_and_gradient,
    sample_objectives,
)
from .projection_service import proximal_l1
from .signal_service import make_sparse_codes
from .solver_service import step_operators

logger = logging.getLogger(__name__)


@dataclass
class TrainingResult:
    """Best-validation network and the per-epoch loss history (epoch 0 is the initialisation)."""
    network: UnrolledNetwork
    history: List[dict] = field(default_factory=list)
    best_epoch: int = 0


def dataset_loss(network: UnrolledNetwork, dataset: SparseCodingDataset, config: TrainingConfig) -> float:
    cache = forward_batch(network, dataset.measurements)
    loss, _ = loss_and_gradient(config.objective, cache.final, dataset.targets, dataset.measurements,
                                dataset.matrix, dataset.lam)
    return loss


@timed
def train(network: UnrolledNetwork, dataset: SparseCodingDataset, config: TrainingConfig) -> TrainingResult:
    """Minibatch SGD with heavy-ball momentum on (A, U, lam).

    The learning rate is halved after `patience` epochs without a new best
    validation loss. The returned network carries the best-validation
    parameters; with zero epochs it is a copy of the input.
    """
    if len(dataset) == 0:
        raise ParameterException("Training data is empty", parameter="data", value=0)
    rng = np.random.default_rng(config.seed)
    train_set, validation_set = dataset.split(config.validation_fraction, rng)

    current = network.copy()
    best = current.copy()
    learning_rate = config.learning_rate
    best_loss = dataset_loss(current, validation_set, config)
    history = [_history_row(0, dataset_loss(current, train_set, config), best_loss, learning_rate)]
    best_epoch = 0
    stale = 0
    velocity_A = np.zeros_like(current.A)
    velocity_U = np.zeros_like(current.U)
    velocity_lam = 0.0
    learn_lam = current.nonlinearity == Nonlinearity.SOFT_THRESHOLD

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_set))
        for start in range(0, len(train_set), config.batch_size):
            batch = train_set.subset(order[start:start + config.batch_size])
            cache = forward_batch(current, batch.measurements)
            _, output_gradient = loss_and_gradient(config.objective, cache.final, batch.targets,
                                                   batch.measurements, batch.matrix, batch.lam)
            grads = backward(current, cache, output_gradient)
            velocity_A = config.momentum * velocity_A - learning_rate * grads.A
            velocity_U = config.momentum * velocity_U - learning_rate * grads.U
            current.A += velocity_A
            current.U += velocity_U
            if learn_lam:
                velocity_lam = config.momentum * velocity_lam - learning_rate * grads.lam
                current.lam = max(current.lam + velocity_lam, 0.0)

        train_loss = dataset_loss(current, train_set, config)
        validation_loss = dataset_loss(current, validation_set, config)
        if not (np.isfinite(train_loss) and np.isfinite(validation_loss)):
            logger.error(f"Training diverged at epoch {epoch}")
            raise TrainingDivergenceException(
                f"Loss is not finite at epoch {epoch}", epoch=epoch, loss=float(train_loss)
            )
        history.append(_history_row(epoch, train_loss, validation_loss, learning_rate))
        logger.debug(f"epoch {epoch}: train {train_loss:.6g} validation {validation_loss:.6g} lr {learning_rate:g}")

        if validation_loss < best_loss:
            best_loss, best, best_epoch, stale = validation_loss, current.copy(), epoch, 0
        else:
            stale += 1
            if stale >= config.patience:
                learning_rate /= 2.0
                stale = 0
                logger.info(f"Validation loss stalled; learning rate halved to {learning_rate:g}")

    return TrainingResult(network=best, history=history, best_epoch=best_epoch)


def _history_row(epoch: int, train_loss: float, validation_loss: float, learning_rate: float) -> dict:
    return {"epoch": epoch, "train_loss": float(train_loss), "val_loss": float(validation_loss), "lr": learning_rate}


def reference_ista(
    measurements: np.ndarray,
    matrix: np.ndarray,
    lam: float,
    iterations: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Approximate minimisers of ||y - M z||^2 + lam ||z||_1 for every row of Y.

    Runs ISTA on the half objective (threshold mu*lam/2, mu = 1/||M||^2),
    whose minimiser is the same. Returns (Z, per-row objective).
    """
    M = np.asarray(matrix, dtype=float)
    Y = np.atleast_2d(np.asarray(measurements, dtype=float))
    step_size = 1.0 / float(np.linalg.norm(M, 2)) ** 2
    A, U = step_operators(M, step_size)
    B = Y @ A.T
    Z = np.zeros((Y.shape[0], M.shape[1]))
    threshold = step_size * lam / 2.0
    for _ in range(iterations):
        Z = proximal_l1(B + Z @ U.T, threshold)
    return Z, sample_objectives(Z, Y, M, lam)


def network_objectives(network: UnrolledNetwork, dataset: SparseCodingDataset) -> np.ndarray:
    """Per-sample objective of the network output at depth T."""
    cache = forward_batch(network, dataset.measurements)
    return sample_objectives(cache.final, dataset.measurements, dataset.matrix, dataset.lam)


def mixture_objectives(mixture: MixtureModel, dataset: SparseCodingDataset) -> np.ndarray:
    """(J x N) objectives of every network on every sample."""
    return np.vstack([network_objectives(network, dataset) for network in mixture.networks])


def mixture_objective(mixture: MixtureModel, dataset: SparseCodingDataset) -> float:
    """Mean over samples of the smallest objective across networks."""
    return float(mixture_objectives(mixture, dataset).min(axis=0).mean())


def assign(mixture: MixtureModel, dataset: SparseCodingDataset) -> np.ndarray:
    """Index of the network with the smallest objective, per sample (lowest index on ties)."""
    return np.argmin(mixture_objectives(mixture, dataset), axis=0)


@timed
def train_mixture(
    J: int,
    network: UnrolledNetwork,
    dataset: SparseCodingDataset,
    config: TrainingConfig,
    reference_objectives: np.ndarray,
    refinement_rounds: int = 0,
) -> MixtureModel:
    """Sequentially trained mixture of J networks, then cluster refinement.

    Network j is trained on the samples still unassigned, warm-started from
    network j - 1. After each network the round(N/J) samples whose objective
    is closest to the reference objective are removed. Each refinement round
    routes every sample to its best network and fine-tunes every network on its
    cluster. A round that raises the mixture objective is kept and logged.
    """
    n = len(dataset)
    if J < 1 or J > n:
        raise ParameterException(f"Mixture size must lie in [1, {n}]", parameter="J", value=J)
    if refinement_rounds < 0:
        raise ParameterException("Refinement rounds must be non-negative", parameter="refinement_rounds",
                                 value=refinement_rounds)
    reference_objectives = np.asarray(reference_objectives, dtype=float)
    if reference_objectives.shape != (n,):
        raise ParameterException("One reference objective per sample is required",
                                 parameter="reference_objectives", value=reference_objectives.shape)

    try:
        remaining = np.arange(n)
        removal = max(1, int(round(n / J)))
        networks: List[UnrolledNetwork] = []
        current = network
        for j in range(J):
            part = dataset.subset(remaining)
            result = train(current, part, _config_for(len(part), config, j))
            networks.append(result.network)
            logger.info(f"Mixture network {j + 1}/{J} trained on {len(part)} samples")
            if j == J - 1:
                break
            distance = np.abs(network_objectives(result.network, part) - reference_objectives[remaining])
            count = min(removal, len(remaining) - 1)
            removed = np.argsort(distance, kind="stable")[:count]
            remaining = np.delete(remaining, removed)
            current = result.network.copy()

        mixture = MixtureModel(networks=networks)
        mixture.objective_history.append(mixture_objective(mixture, dataset))
        for round_index in range(refinement_rounds):
            mixture = _refine(mixture, dataset, config, round_index)
        return mixture
    except ApplicationException:
        raise
    except Exception as e:
        logger.error(f"Mixture training failed: {str(e)}", exc_info=True)
        raise ApplicationException(
            f"Mixture training failed: {str(e)}", error_code=ErrorCode.INTERNAL_ERROR, cause=e
        )


def _refine(mixture: MixtureModel, dataset: SparseCodingDataset, config: TrainingConfig,
            round_index: int) -> MixtureModel:
    labels = assign(mixture, dataset)
    candidates = []
    for j, network in enumerate(mixture.networks):
        members = np.flatnonzero(labels == j)
        if members.size == 0:
            candidates.append(network.copy())
            continue
        tuned = replace(_config_for(members.size, config, j),
                        seed=derive_seed(config.seed, 1000 * (round_index + 1) + j))
        candidates.append(train(network, dataset.subset(members), tuned).network)

    refined = MixtureModel(networks=candidates, objective_history=list(mixture.objective_history))
    value = mixture_objective(refined, dataset)
    previous = mixture.objective_history[-1]
    refined.objective_history.append(value)
    if value > previous:
        logger.warning(f"Refinement round {round_index + 1} raised the mixture objective {previous:.6g} -> {value:.6g}")
    else:
        logger.info(f"Refinement round {round_index + 1}: mixture objective {previous:.6g} -> {value:.6g}")
    return refined


def _config_for(n: int, config: TrainingConfig, index: int) -> TrainingConfig:
    # small parts cannot hold out a validation set
    held_out = int(round(n * config.validation_fraction))
    fraction = config.validation_fraction if 0 < held_out < n else 0.0
    seed = config.seed if index == 0 else derive_seed(config.seed, index)
    return replace(config, validation_fraction=fraction, seed=seed)


def default_network(matrix: np.ndarray, layers: int, lam: float, step_size: Optional[float] = None) -> UnrolledNetwork:
    """ISTA-initialised soft-threshold network for the objective with weight lam.

    The threshold mu*lam/2 matches `reference_ista`.
    """
    M = np.asarray(matrix, dtype=float)
    step_size = step_size or 1.0 / float(np.linalg.norm(M, 2)) ** 2
    return initialize_from_solver(M, step_size, layers, Nonlinearity.SOFT_THRESHOLD, lam=lam / 2.0)


def normalized_gaussian_matrix(m: int, d: int, seed: int) -> np.ndarray:
    """m x d matrix with N(0, 1/m) entries."""
    return np.random.default_rng(seed).standard_normal((m, d)) / np.sqrt(m)


def synthetic_dataset(
    matrix: np.ndarray,
    n_samples: int,
    k: int,
    lam: float,
    seed: int,
    reference_iterations: int,
) -> tuple[SparseCodingDataset, np.ndarray]:
    """Noiseless measurements of random k-sparse codes, targeting the reference ISTA solution.

    Returns the dataset and the reference objective of every sample.
    """
    codes = make_sparse_codes(n_samples, matrix.shape[1], k, seed)
    Y = codes @ matrix.T
    reference, objectives = reference_ista(Y, matrix, lam, reference_iterations)
    dataset = SparseCodingDataset(measurements=Y, codes=codes, targets=reference, matrix=matrix, lam=lam)
    return dataset, objectives
