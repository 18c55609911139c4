"""
Inexact operators p and their model error.

`apply_inexact` returns its input object unchanged for the identity, so an
inexact solver with p = I performs exactly the arithmetic of the exact one.
"""
import logging
from math import log2, sqrt

import numpy as np

from src.domain.value_objects.constraint_set import ConstraintSet
from src.domain.value_objects.estimates import ProjectionReport
from src.domain.value_objects.inexact_operator import InexactKind, InexactOperator
from src.domain.value_objects.transform import Transform
from src.domain.value_objects.tree_topology import TreeTopology
from src.shared.exceptions import (
    ParameterException,
    UndefinedRatioException,
    UnsupportedOperationException,
)

from .projection_service import project

logger = logging.getLogger(__name__)


def apply_inexact(p: InexactOperator, v: np.ndarray, t: int = 0) -> np.ndarray:
    """Apply the operator active at iteration t."""
    operator = p.active(t)
    if operator.kind == InexactKind.IDENTITY:
        return v
    v = np.asarray(v, dtype=float)
    if operator.kind == InexactKind.LEVEL_TRUNCATION:
        tree = TreeTopology.from_dimension(v.shape[0])
        out = v.copy()
        out[tree.prefix_size(operator.levels):] = 0.0
        return out
    if operator.kind == InexactKind.NEIGHBORHOOD_DOMINANT:
        return _neighborhood_dominant(v, operator.window)
    coefficients = operator.transform.analysis(v)
    masked = np.zeros_like(coefficients)
    idx = np.asarray(operator.indices, dtype=int)
    masked[idx] = coefficients[idx]
    return operator.transform.synthesis(masked)


def _neighborhood_dominant(v: np.ndarray, window: int) -> np.ndarray:
    # greedy by magnitude; a kept entry blocks every index at distance < window
    out = np.zeros_like(v)
    blocked = np.zeros(v.shape[0], dtype=bool)
    for i in np.argsort(-np.abs(v), kind="stable"):
        if v[i] == 0:
            break
        if blocked[i]:
            continue
        out[i] = v[i]
        blocked[max(0, i - window + 1):i + window] = True
    return out


def inexact_cost(p: InexactOperator, d: int, t: int = 0) -> int:
    """Operation-count model of one application of p."""
    operator = p.active(t)
    if operator.kind == InexactKind.IDENTITY:
        return 0
    if operator.kind == InexactKind.LEVEL_TRUNCATION:
        return d
    if operator.kind == InexactKind.NEIGHBORHOOD_DOMINANT:
        return int(d * max(1.0, log2(d)))
    return 2 * operator.transform.apply_cost + d


def operator_matrix(p: InexactOperator, d: int, t: int = 0) -> np.ndarray:
    """Dense d x d matrix of a linear operator."""
    operator = p.active(t)
    if not operator.linear:
        raise UnsupportedOperationException("Only linear operators have a matrix", kind=operator.kind.value)
    eye = np.eye(d)
    return np.column_stack([apply_inexact(operator, eye[:, j]) for j in range(d)])


def measure_epsilon(p: InexactOperator, constraint: ConstraintSet, x: np.ndarray, t: int = 0) -> ProjectionReport:
    """Model error of p at x, for the convex condition and its sufficient form."""
    x = np.asarray(x, dtype=float)
    norm_x = float(np.linalg.norm(x))
    if norm_x == 0:
        raise UndefinedRatioException()
    px = apply_inexact(p, x, t)
    output = project(constraint, px)
    return ProjectionReport(
        output=output,
        epsilon_convex=float(np.linalg.norm(x - output)) / norm_x,
        epsilon_sufficient=float(np.linalg.norm(x - px)) / norm_x,
    )


def measure_epsilon_nonconvex(
    p: InexactOperator,
    constraint: ConstraintSet,
    x: np.ndarray,
    probes: int,
    seed: int,
    t: int = 0,
) -> float:
    """Sampled estimate of sup_v ||P_K(pv - px) - P_K(pv - x)|| / ||x||.

    The supremum runs over all of R^d, so the value is a lower bound on the
    true model error. Gaussian probes at three scales are complemented by the
    fixed probes 0, x, x/2, 2x and -x.
    """
    if probes < 1:
        raise ParameterException("At least one probe is required", parameter="probes", value=probes)
    x = np.asarray(x, dtype=float)
    norm_x = float(np.linalg.norm(x))
    if norm_x == 0:
        raise UndefinedRatioException()
    px = apply_inexact(p, x, t)
    rng = np.random.default_rng(seed)
    scale = norm_x / sqrt(x.shape[0])
    fixed = [np.zeros_like(x), x, 0.5 * x, 2.0 * x, -x]
    random = []
    for i in range(probes):
        g = rng.standard_normal(x.shape[0]) * scale * (0.1, 1.0, 10.0)[i % 3]
        random.append(g if i % 2 == 0 else x + g)

    worst = 0.0
    for v in fixed + random:
        pv = apply_inexact(p, v, t)
        gap = np.linalg.norm(project(constraint, pv - px) - project(constraint, pv - x))
        worst = max(worst, float(gap) / norm_x)
    logger.debug(f"Sampled nonconvex model error {worst:.4g} over {probes + len(fixed)} probes (lower bound)")
    return worst


def mask_epsilon_upper_bound(p: InexactOperator, x: np.ndarray, t: int = 0) -> float:
    """Upper bound sqrt(2) ||x - p(x)|| / ||x|| on the nonconvex model error.

    Valid when p keeps a fixed set of coordinates and K is the k-sparse set:
    every entry of p(v - x) displaced from the top-k selection is outweighed by
    the entry of x - p(x) that displaced it.
    """
    operator = p.active(t)
    if not operator.is_coordinate_mask:
        raise UnsupportedOperationException("The displacement bound needs a coordinate mask",
                                            kind=operator.kind.value)
    x = np.asarray(x, dtype=float)
    norm_x = float(np.linalg.norm(x))
    if norm_x == 0:
        raise UndefinedRatioException()
    return sqrt(2.0) * float(np.linalg.norm(x - apply_inexact(operator, x, t))) / norm_x


def ranked_coefficients(transform: Transform, x: np.ndarray) -> np.ndarray:
    """Coefficient indices of x sorted by decreasing magnitude (ties by index)."""
    return np.argsort(-np.abs(transform.analysis(x)), kind="stable")


def oracle_energy_subset(transform: Transform, x: np.ndarray, energy_fraction: float) -> tuple[int, ...]:
    """Smallest leading set of ranked coefficients with ||x - p(x)|| <= (1 - fraction) ||x||."""
    if not 0 < energy_fraction <= 1:
        raise ParameterException("Energy fraction must lie in (0, 1]", parameter="energy_fraction",
                                 value=energy_fraction)
    coefficients = transform.analysis(x)
    order = np.argsort(-np.abs(coefficients), kind="stable")
    squares = coefficients[order] ** 2
    tails = np.sqrt(np.concatenate((np.cumsum(squares[::-1])[::-1], [0.0])))
    total = tails[0]
    if total == 0:
        raise UndefinedRatioException()
    count = int(np.argmax(tails <= (1.0 - energy_fraction) * total))
    return tuple(int(i) for i in order[:max(count, 1)])
