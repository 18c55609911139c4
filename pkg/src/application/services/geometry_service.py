"""
Cone geometry: Gaussian mean width, the l1 statistical dimension and the
restricted rates rho(K) and rho_p(K) of I - mu M'M.
"""
import logging
from itertools import combinations
from math import comb, log2, sqrt
from typing import Callable, Optional

import numpy as np
from scipy import optimize, stats

from src.domain.entities.measurement_model import MeasurementModel
from src.domain.value_objects.estimates import (
    ConeDescriptor,
    ConeKind,
    EstimateMethod,
    RhoEstimate,
    WidthEstimate,
)
from src.domain.value_objects.inexact_operator import InexactOperator
from src.domain.value_objects.tree_topology import TreeTopology
from src.shared.config.settings import get_settings
from src.shared.exceptions import (
    EnumerationTooLargeException,
    ParameterException,
    UnsupportedOperationException,
    ValidationException,
)
from src.shared.trial_runner import TrialRunner, TrialRunnerConfig

from .inexact_projection_service import operator_matrix
from .projection_service import (
    project_descent_cone_l1,
    rooted_subtree_count,
    rooted_subtrees,
    tree_best_energy,
    tree_support,
)

logger = logging.getLogger(__name__)


# Gaussian mean width

def mean_width_monte_carlo(
    cone: ConeDescriptor,
    samples: int,
    seed: int,
    runner: Optional[TrialRunner] = None,
) -> WidthEstimate:
    """Sample mean of sup <g, v> over the set intersected with the unit ball.

    Draws are generated in blocks, block b from the seed (seed, b), so the
    estimate does not depend on how blocks are scheduled.
    """
    if cone.kind == ConeKind.L1_DESCENT_CONE:
        raise UnsupportedOperationException(
            "Use statistical_dimension_l1 for the l1 descent cone", kind=cone.kind.value
        )
    if samples < 2:
        raise ParameterException("At least two samples are needed for a standard error", parameter="samples",
                                 value=samples)
    block_size = get_settings().MONTE_CARLO_BLOCK_SIZE
    n_blocks = -(-samples // block_size)
    supremum = _supremum_function(cone)

    def block(index: int, _derived_seed: int) -> np.ndarray:
        rng = np.random.default_rng([seed, index])
        size = min(block_size, samples - index * block_size)
        return supremum(rng.standard_normal((size, cone.dimension)))

    runner = runner or TrialRunner(TrialRunnerConfig.from_settings())
    values = np.concatenate(runner.run(block, n_blocks, seed, label=f"width {cone.kind.value}").results)
    relaxed = cone.kind == ConeKind.TREE_DIFFERENCE
    return WidthEstimate(
        value=float(values.mean()),
        stderr=float(values.std(ddof=1) / sqrt(values.size)),
        samples=int(values.size),
        method=EstimateMethod.MONTE_CARLO,
        is_upper_bound=relaxed,
        note="single rooted subtree of 2k nodes relaxes the union of two subtrees" if relaxed else "",
    )


def _supremum_function(cone: ConeDescriptor) -> Callable[[np.ndarray], np.ndarray]:
    if cone.kind == ConeKind.SUBSPACE:
        idx = np.asarray(cone.indices, dtype=int)
        return lambda g: np.linalg.norm(g[:, idx], axis=1)
    if cone.kind == ConeKind.SPARSE_DIFFERENCE:
        s = cone.support_size

        def sparse(g: np.ndarray) -> np.ndarray:
            top = -np.partition(-g ** 2, s - 1, axis=1)[:, :s]
            return np.sqrt(top.sum(axis=1))
        return sparse
    tree = TreeTopology.from_dimension(cone.dimension)
    budget = cone.support_size
    return lambda g: np.sqrt(tree_best_energy(g ** 2, budget, tree.levels))


# Statistical dimension of the l1 descent cone

def statistical_dimension_l1(x: np.ndarray, d: Optional[int] = None) -> WidthEstimate:
    """Width proxy sqrt(min_tau k(1+tau^2) + (d-k) E[soft(g, tau)^2]) of the l1 descent cone.

    The value squared is the statistical-dimension bound; the scalar
    minimisation is a golden-section search to 1e-8.
    """
    x = np.asarray(x, dtype=float)
    d = d or x.shape[0]
    if x.shape[0] != d or not np.all(np.isfinite(x)):
        raise ValidationException("Reference signal must be a finite vector of length d", field="x")
    k = int(np.count_nonzero(x))
    if k == 0:
        raise ValidationException("Reference signal must have a nonzero entry", field="x")
    if k == d:
        return WidthEstimate(value=sqrt(d), stderr=0.0, samples=0, method=EstimateMethod.CLOSED_FORM)

    def objective(tau: float) -> float:
        tau = max(tau, 0.0)
        tail = 2.0 * ((1.0 + tau ** 2) * stats.norm.sf(tau) - tau * stats.norm.pdf(tau))
        return k * (1.0 + tau ** 2) + (d - k) * tail

    guess = sqrt(2.0 * np.log(d / k))
    result = optimize.minimize_scalar(objective, bracket=(0.0, guess), method="golden", tol=1e-8)
    value = min(objective(result.x), float(d))
    return WidthEstimate(value=sqrt(value), stderr=0.0, samples=0, method=EstimateMethod.CLOSED_FORM,
                         is_upper_bound=True, note="squared value bounds E||P_C(g)||^2 from above")


def statistical_dimension_monte_carlo(x: np.ndarray, samples: int, seed: int) -> WidthEstimate:
    """E||P_C(g)||^2 for the l1 descent cone C at x, by exact cone projections.

    `value` holds the square root of the sample mean so that it is comparable
    with `statistical_dimension_l1`; `stderr` refers to the squared quantity.
    """
    if samples < 2:
        raise ParameterException("At least two samples are needed", parameter="samples", value=samples)
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(seed)
    values = np.empty(samples)
    for i in range(samples):
        projected = project_descent_cone_l1(rng.standard_normal(x.shape[0]), x)
        values[i] = projected @ projected
    return WidthEstimate(
        value=sqrt(float(values.mean())),
        stderr=float(values.std(ddof=1) / sqrt(samples)),
        samples=samples,
        method=EstimateMethod.MONTE_CARLO,
        note="stderr of the squared width",
    )


# Restricted rates

def gram_residual(model: MeasurementModel, step_size: float,
                  inexact: Optional[InexactOperator] = None) -> np.ndarray:
    """I - mu M'M, or P'(I - mu M'M)P for a linear operator p with matrix P."""
    if step_size < 0:
        raise ParameterException("Step size must be non-negative", parameter="mu", value=step_size)
    G = np.eye(model.d) - step_size * (model.matrix.T @ model.matrix)
    if inexact is not None:
        P = operator_matrix(inexact, model.d)
        G = P.T @ G @ P
    return G


def maximal_supports(cone: ConeDescriptor) -> list[tuple[int, ...]]:
    """Supports whose subspaces cover the set; every member lives on one of them."""
    limit = get_settings().RHO_ENUMERATION_LIMIT
    if cone.kind == ConeKind.SUBSPACE:
        return [tuple(cone.indices)]
    if cone.kind == ConeKind.SPARSE_DIFFERENCE:
        s = cone.support_size
        count = comb(cone.dimension, s)
        if count > limit:
            raise EnumerationTooLargeException(f"{count} supports exceed the enumeration limit", count, limit)
        return list(combinations(range(cone.dimension), s))
    if cone.kind == ConeKind.TREE_DIFFERENCE:
        tree = TreeTopology.from_dimension(cone.dimension)
        count = rooted_subtree_count(tree.levels, cone.k)
        if count * count > limit:
            raise EnumerationTooLargeException(f"{count} subtrees give too many unions", count * count, limit)
        subtrees = rooted_subtrees(tree, cone.k)
        unions = {tuple(sorted(a | b)) for a in subtrees for b in subtrees}
        return sorted(unions, key=lambda s: (len(s), s))
    raise UnsupportedOperationException("Supports are not enumerable for this cone", kind=cone.kind.value)


def rho_brute_force(
    model: MeasurementModel,
    cone: ConeDescriptor,
    step_size: float,
    inexact: Optional[InexactOperator] = None,
) -> RhoEstimate:
    """Exact sup of u'(I - mu M'M)v over unit u, v in the set (through p when given).

    The supremum is the largest spectral norm of the submatrices indexed by
    pairs of maximal supports.
    """
    if cone.dimension != model.d:
        raise ValidationException("Cone does not match M", field="dimension", value=cone.dimension)
    supports = maximal_supports(cone)
    pairs = len(supports) ** 2
    limit = get_settings().RHO_ENUMERATION_LIMIT
    if pairs > limit:
        raise EnumerationTooLargeException(f"{pairs} support pairs exceed the enumeration limit", pairs, limit)
    G = gram_residual(model, step_size, inexact)

    best = 0.0
    groups: dict[int, list[tuple[int, ...]]] = {}
    for support in supports:
        groups.setdefault(len(support), []).append(support)
    for rows in groups.values():
        row_idx = np.array(rows)
        for cols in groups.values():
            col_idx = np.array(cols)
            best = max(best, _largest_block_norm(G, row_idx, col_idx))
    logger.debug(f"Brute-force rate over {pairs} support pairs: {best:.6g}")
    return RhoEstimate(value=best, method=EstimateMethod.BRUTE_FORCE, kappa=cone.kappa,
                       is_lower_bound=False, evaluated=pairs)


def _largest_block_norm(G: np.ndarray, row_idx: np.ndarray, col_idx: np.ndarray, chunk: int = 20000) -> float:
    best = 0.0
    for start in range(0, row_idx.shape[0], max(1, chunk // max(1, col_idx.shape[0]))):
        rows = row_idx[start:start + max(1, chunk // max(1, col_idx.shape[0]))]
        blocks = G[rows[:, None, :, None], col_idx[None, :, None, :]]
        blocks = blocks.reshape((-1,) + blocks.shape[2:])
        best = max(best, float(np.linalg.norm(blocks, ord=2, axis=(1, 2)).max()))
    return best


def rho_alternating(
    model: MeasurementModel,
    cone: ConeDescriptor,
    step_size: float,
    restarts: int,
    seed: int,
    inexact: Optional[InexactOperator] = None,
    max_sweeps: int = 500,
) -> RhoEstimate:
    """Alternating maximisation of u'Gv over the set; a lower bound on the rate.

    Each sweep replaces u by the best unit direction in the set for Gv and
    then v by the best one for G'u. Starts are every basis vector plus
    `restarts` Gaussian draws. On union-of-subspace sets the value of the final
    support pair is polished with an exact spectral norm.
    """
    if cone.dimension != model.d:
        raise ValidationException("Cone does not match M", field="dimension", value=cone.dimension)
    if restarts < 0:
        raise ParameterException("Restart count must be non-negative", parameter="restarts", value=restarts)
    if inexact is not None and not inexact.linear:
        raise UnsupportedOperationException("Restricted rates need a linear operator", kind=inexact.kind.value)
    G = gram_residual(model, step_size, inexact)
    best_direction = _direction_oracle(cone)
    rng = np.random.default_rng(seed)
    starts = [np.eye(cone.dimension)[i] for i in range(cone.dimension)]
    starts += [rng.standard_normal(cone.dimension) for _ in range(restarts)]

    best = 0.0
    for start in starts:
        v = best_direction(start)
        value = -np.inf
        for _ in range(max_sweeps):
            u = best_direction(G @ v)
            v = best_direction(G.T @ u)
            current = float(u @ G @ v)
            if current - value <= 1e-14 * max(1.0, abs(current)):
                value = current
                break
            value = current
        if cone.kind != ConeKind.L1_DESCENT_CONE:
            rows, cols = np.flatnonzero(u), np.flatnonzero(v)
            if rows.size and cols.size:
                value = max(value, float(np.linalg.norm(G[np.ix_(rows, cols)], 2)))
        best = max(best, value)
    return RhoEstimate(value=max(best, 0.0), method=EstimateMethod.ALTERNATING_MAXIMIZATION, kappa=cone.kappa,
                       is_lower_bound=True, evaluated=len(starts))


def _direction_oracle(cone: ConeDescriptor) -> Callable[[np.ndarray], np.ndarray]:
    """argmax of <u, w> over unit u in the set."""

    def normalized(u: np.ndarray) -> np.ndarray:
        norm = np.linalg.norm(u)
        return u / norm if norm > 0 else u

    def restrict(w: np.ndarray, support) -> np.ndarray:
        out = np.zeros_like(w)
        out[support] = w[support]
        return normalized(out)

    if cone.kind == ConeKind.SUBSPACE:
        idx = np.asarray(cone.indices, dtype=int)
        return lambda w: restrict(w, idx)
    if cone.kind == ConeKind.SPARSE_DIFFERENCE:
        s = cone.support_size
        return lambda w: restrict(w, np.argsort(-np.abs(w), kind="stable")[:s])
    if cone.kind == ConeKind.L1_DESCENT_CONE:
        reference = np.asarray(cone.reference)
        return lambda w: normalized(project_descent_cone_l1(w, reference))

    tree = TreeTopology.from_dimension(cone.dimension)
    try:
        supports = maximal_supports(cone)
    except EnumerationTooLargeException:
        supports = None
    if supports is not None:
        masks = np.zeros((len(supports), cone.dimension))
        for row, support in enumerate(supports):
            masks[row, list(support)] = 1.0
        return lambda w: restrict(w, np.flatnonzero(masks[int(np.argmax(masks @ w ** 2))]))

    def two_subtrees(w: np.ndarray) -> np.ndarray:
        # greedy union: best subtree, then best subtree on the remaining energy
        first = tree_support(w, cone.k, tree)
        residual = w.copy()
        residual[first] = 0.0
        residual[0] = w[0]
        second = tree_support(residual, cone.k, tree) if np.any(residual) else first
        return restrict(w, np.union1d(first, second))
    return two_subtrees


def support_count_estimate(cone: ConeDescriptor) -> int:
    """Number of maximal supports, without enumerating them."""
    if cone.kind == ConeKind.SUBSPACE:
        return 1
    if cone.kind == ConeKind.SPARSE_DIFFERENCE:
        return comb(cone.dimension, cone.support_size)
    if cone.kind == ConeKind.TREE_DIFFERENCE:
        return rooted_subtree_count(TreeTopology.from_dimension(cone.dimension).levels, cone.k) ** 2
    return 0


def tree_width_scale(k: int) -> float:
    """sqrt(2k), the order of the tree-difference width."""
    return sqrt(2 * k)


def sparse_width_scale(d: int, k: int) -> float:
    """sqrt(2k log(d / 2k)), the order of the sparse-difference width."""
    return sqrt(2 * k * max(1.0, log2(d / (2 * k))))
