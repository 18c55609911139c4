"""
Unrolled networks z_{t+1} = phi(A y + U z_t): forward passes, reverse-mode
gradients with respect to (A, U, lam), losses and initialisation from the
classical iterations.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from src.domain.entities.unrolled_network import Nonlinearity, UnrolledNetwork
from src.domain.value_objects.training_config import TrainingObjective
from src.shared.exceptions import DimensionMismatchException, ValidationException

from .projection_service import project_l1_ball, proximal_l1
from .solver_service import apply_nonlinearity, step_operators

logger = logging.getLogger(__name__)


@dataclass
class ForwardPass:
    """Cached activations of a batch forward pass.

    `outputs[t]` holds z_t (outputs[0] is zero), `pre_activations[t]` holds
    A y + U z_t, the input of the nonlinearity in layer t + 1.
    """
    measurements: np.ndarray
    outputs: List[np.ndarray] = field(default_factory=list)
    pre_activations: List[np.ndarray] = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.outputs[-1]


@dataclass
class Gradients:
    A: np.ndarray
    U: np.ndarray
    lam: float

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.A ** 2) + np.sum(self.U ** 2) + self.lam ** 2))


def initialize_from_solver(
    matrix: np.ndarray,
    step_size: float,
    layers: int,
    nonlinearity: Nonlinearity,
    lam: float = 0.0,
    k: Optional[int] = None,
    radius: Optional[float] = None,
) -> UnrolledNetwork:
    """Network that reproduces ISTA (threshold mu*lam), IHT or l1-ball PGD."""
    A, U = step_operators(np.asarray(matrix, dtype=float), step_size)
    return UnrolledNetwork(
        A=A,
        U=U,
        nonlinearity=Nonlinearity(nonlinearity),
        layers=layers,
        lam=step_size * lam if nonlinearity == Nonlinearity.SOFT_THRESHOLD else 0.0,
        k=k,
        radius=radius,
    )


def forward(network: UnrolledNetwork, y: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Run the T layers on one measurement vector.

    Returns z_T and the list of layer outputs z_1..z_T. The arithmetic is the
    one of the solvers, so an initialised network reproduces them exactly.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (network.m,):
        raise DimensionMismatchException("Measurement does not match A", expected=network.m, actual=y.shape)
    c = network.A @ y
    z = np.zeros(network.d)
    outputs = []
    for _ in range(network.layers):
        z = apply_nonlinearity(network, c + network.U @ z)
        outputs.append(z)
    return z, outputs


def forward_batch(network: UnrolledNetwork, measurements: np.ndarray) -> ForwardPass:
    """Forward pass over the rows of an N x m measurement matrix."""
    Y = np.atleast_2d(np.asarray(measurements, dtype=float))
    if Y.shape[1] != network.m:
        raise DimensionMismatchException("Measurements do not match A", expected=network.m, actual=Y.shape)
    C = Y @ network.A.T
    Z = np.zeros((Y.shape[0], network.d))
    cache = ForwardPass(measurements=Y, outputs=[Z])
    for _ in range(network.layers):
        V = C + Z @ network.U.T
        Z = _nonlinearity_rows(network, V)
        cache.pre_activations.append(V)
        cache.outputs.append(Z)
    return cache


def _nonlinearity_rows(network: UnrolledNetwork, V: np.ndarray) -> np.ndarray:
    if network.nonlinearity == Nonlinearity.SOFT_THRESHOLD:
        return proximal_l1(V, network.lam)
    if network.nonlinearity == Nonlinearity.HARD_TOP_K:
        out = np.zeros_like(V)
        keep = _top_k_rows(V, network.k)
        np.put_along_axis(out, keep, np.take_along_axis(V, keep, axis=1), axis=1)
        return out
    return np.vstack([project_l1_ball(v, network.radius) for v in V])


def _top_k_rows(V: np.ndarray, k: int) -> np.ndarray:
    return np.argsort(-np.abs(V), axis=1, kind="stable")[:, :k]


def backward(network: UnrolledNetwork, cache: ForwardPass, output_gradient: np.ndarray) -> Gradients:
    """Reverse-mode gradients of a loss with dL/dz_T = `output_gradient` (N x d).

    Soft threshold: dz/dv = 1{|v| > lam}, dz/dlam = -sgn(v) 1{|v| > lam}.
    Hard top-k: identity on the kept coordinates.
    l1 ball: identity inside the ball, otherwise the projection onto
    {h : sum_S sgn(v_i) h_i = 0} restricted to the active set S.
    """
    if not cache.pre_activations:
        raise ValidationException("Backward pass needs the activations of a forward pass", field="cache")
    G = np.atleast_2d(np.asarray(output_gradient, dtype=float))
    if G.shape != cache.final.shape:
        raise DimensionMismatchException("Output gradient does not match z_T", expected=cache.final.shape,
                                         actual=G.shape)
    grad_U = np.zeros_like(network.U)
    grad_C = np.zeros_like(G)
    grad_lam = 0.0
    for t in range(network.layers - 1, -1, -1):
        V = cache.pre_activations[t]
        dV, dlam = _nonlinearity_vjp(network, V, cache.outputs[t + 1], G)
        grad_lam += dlam
        grad_U += dV.T @ cache.outputs[t]
        grad_C += dV
        G = dV @ network.U
    grad_A = grad_C.T @ cache.measurements
    return Gradients(A=grad_A, U=grad_U, lam=grad_lam)


def _nonlinearity_vjp(network: UnrolledNetwork, V: np.ndarray, Z: np.ndarray,
                      G: np.ndarray) -> Tuple[np.ndarray, float]:
    if network.nonlinearity == Nonlinearity.SOFT_THRESHOLD:
        active = np.abs(V) > network.lam
        dV = G * active
        return dV, float(-np.sum(np.sign(V) * active * G))
    if network.nonlinearity == Nonlinearity.HARD_TOP_K:
        mask = np.zeros_like(V, dtype=bool)
        np.put_along_axis(mask, _top_k_rows(V, network.k), True, axis=1)
        return G * mask, 0.0

    dV = G.copy()
    for row in range(V.shape[0]):
        if np.abs(V[row]).sum() <= network.radius:
            continue
        active = Z[row] != 0
        signs = np.sign(V[row, active])
        g = G[row, active]
        dV[row] = 0.0
        dV[row, active] = g - signs * (signs @ g) / active.sum()
    return dV, 0.0


def sample_objectives(Z: np.ndarray, measurements: np.ndarray, matrix: np.ndarray, lam: float) -> np.ndarray:
    """Per-row ||y - M z||^2 + lam ||z||_1."""
    R = measurements - Z @ matrix.T
    return np.sum(R ** 2, axis=1) + lam * np.sum(np.abs(Z), axis=1)


def layer_objectives(network: UnrolledNetwork, measurements: np.ndarray, matrix: np.ndarray,
                     lam: float) -> np.ndarray:
    """Mean objective at every depth t = 0..T."""
    cache = forward_batch(network, measurements)
    return np.array([sample_objectives(Z, cache.measurements, matrix, lam).mean() for Z in cache.outputs])


def loss_and_gradient(
    objective: TrainingObjective,
    Z: np.ndarray,
    targets: np.ndarray,
    measurements: np.ndarray,
    matrix: np.ndarray,
    lam: float,
) -> Tuple[float, np.ndarray]:
    """Mean loss over the batch and its gradient with respect to z_T.

    supervised-l2: 1/2 ||z - target||^2. direct-objective: ||y - M z||^2 + lam ||z||_1.
    """
    n = Z.shape[0]
    if objective == TrainingObjective.SUPERVISED_L2:
        diff = Z - targets
        return 0.5 * float(np.sum(diff ** 2)) / n, diff / n
    residual = measurements - Z @ matrix.T
    loss = float(np.sum(residual ** 2) + lam * np.sum(np.abs(Z))) / n
    return loss, (-2.0 * residual @ matrix + lam * np.sign(Z)) / n
