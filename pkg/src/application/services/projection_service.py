"""
Exact Euclidean projections onto the constraint sets, the l1 proximal map and
the tree-sparse dynamic program shared by the projection and the width estimator.
All functions are pure and never modify their inputs.
"""
import logging
from functools import lru_cache
from math import log2
from typing import Optional

import numpy as np

from src.domain.value_objects.constraint_set import ConstraintKind, ConstraintSet
from src.domain.value_objects.transform import Transform
from src.domain.value_objects.tree_topology import TreeTopology
from src.shared.exceptions import (
    DimensionMismatchException,
    ParameterException,
    UnsupportedOperationException,
)

logger = logging.getLogger(__name__)


def proximal_l1(v: np.ndarray, threshold: float) -> np.ndarray:
    """Element-wise shrinkage sgn(v) * max(0, |v| - threshold)."""
    if threshold < 0:
        raise ParameterException("Threshold must be non-negative", parameter="threshold", value=threshold)
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - threshold, 0.0)


def project_l1_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Projection onto {z : ||z||_1 <= radius} by sort and threshold."""
    if not radius > 0:
        raise ParameterException("l1-ball radius must be positive", parameter="radius", value=radius)
    v = np.asarray(v, dtype=float)
    magnitudes = np.abs(v)
    if magnitudes.sum() <= radius:
        return v.copy()
    u = np.sort(magnitudes)[::-1]
    css = np.cumsum(u)
    positions = np.arange(1, u.shape[0] + 1)
    rho = np.nonzero(u - (css - radius) / positions > 0)[0][-1]
    theta = (css[rho] - radius) / (rho + 1)
    return np.sign(v) * np.maximum(magnitudes - theta, 0.0)


def project_k_sparse(v: np.ndarray, k: int) -> np.ndarray:
    """Keep the k largest magnitudes; ties go to the lowest index."""
    v = np.asarray(v, dtype=float)
    if not 1 <= k <= v.shape[0]:
        raise ParameterException("Sparsity must satisfy 1 <= k <= d", parameter="k", value=k)
    keep = np.argsort(-np.abs(v), kind="stable")[:k]
    out = np.zeros_like(v)
    out[keep] = v[keep]
    return out


def project_tree_sparse(v: np.ndarray, k: int, tree: Optional[TreeTopology] = None) -> np.ndarray:
    """Projection onto vectors supported on a rooted subtree of at most k nodes."""
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    support = tree_support(v, k, tree)
    out[support] = v[support]
    return out


def tree_support(v: np.ndarray, k: int, tree: Optional[TreeTopology] = None) -> np.ndarray:
    """Rooted subtree of at most k nodes retaining the most energy of v.

    The dynamic program only runs over the levels that hold nonzero entries,
    since deeper nodes cannot add energy.
    """
    v = np.asarray(v, dtype=float)
    tree = tree or TreeTopology.from_dimension(v.shape[0])
    if v.shape[0] != tree.size:
        raise DimensionMismatchException("Vector does not match the tree", expected=tree.size, actual=v.shape[0])
    if k < 1:
        raise ParameterException("Tree sparsity must be at least 1", parameter="k", value=k)
    effective_levels = effective_tree_levels(v)
    if effective_levels == 0:
        return np.array([0], dtype=int)
    size = (1 << effective_levels) - 1
    budget = min(k, size)
    _, splits = _tree_tables(v[None, :size] ** 2, budget, effective_levels, keep_splits=True)

    support = []
    stack = [(0, 1, budget)]
    while stack:
        index, level, remaining = stack.pop()
        if remaining == 0:
            continue
        support.append(index)
        if level == effective_levels:
            continue
        position = index - ((1 << (level - 1)) - 1)
        left_budget = int(splits[level][0, position, remaining - 1])
        stack.append((2 * index + 1, level + 1, left_budget))
        stack.append((2 * index + 2, level + 1, remaining - 1 - left_budget))
    return np.array(sorted(support), dtype=int)


def tree_best_energy(energies: np.ndarray, budget: int, levels: int) -> np.ndarray:
    """Largest energy on a rooted subtree of at most `budget` nodes, per row of `energies`."""
    energies = np.atleast_2d(np.asarray(energies, dtype=float))
    best, _ = _tree_tables(energies, min(budget, (1 << levels) - 1), levels, keep_splits=False)
    return best[:, -1]


def effective_tree_levels(v: np.ndarray) -> int:
    """Number of levels down to the deepest nonzero entry (0 for the zero vector)."""
    nonzero = np.flatnonzero(v)
    if nonzero.size == 0:
        return 0
    return int(nonzero[-1] + 1).bit_length()


def _tree_tables(energies: np.ndarray, budget: int, levels: int, keep_splits: bool):
    # best[b, node, j]: max energy using at most j nodes of the subtree, root included when j >= 1
    batch = energies.shape[0]
    leaves = slice((1 << (levels - 1)) - 1, (1 << levels) - 1)
    best = np.zeros((batch, (1 << (levels - 1)), budget + 1))
    best[:, :, 1:] = energies[:, leaves, None]
    splits = {}
    for level in range(levels - 1, 0, -1):
        nodes = slice((1 << (level - 1)) - 1, (1 << level) - 1)
        left = best[:, 0::2, :]
        right = best[:, 1::2, :]
        combined = np.empty(left.shape[:2] + (budget,))
        arg = np.empty(left.shape[:2] + (budget,), dtype=int) if keep_splits else None
        for total in range(budget):
            candidates = left[:, :, :total + 1] + right[:, :, total::-1]
            combined[:, :, total] = candidates.max(axis=2)
            if keep_splits:
                arg[:, :, total] = candidates.argmax(axis=2)
        best = np.zeros(left.shape[:2] + (budget + 1,))
        best[:, :, 1:] = energies[:, nodes, None] + combined
        if keep_splits:
            splits[level] = arg
    return best[:, 0, :], splits


def project_subspace(v: np.ndarray, transform: Transform, indices) -> np.ndarray:
    """Orthogonal projection onto the span of the selected basis vectors."""
    if not transform.is_orthonormal:
        raise UnsupportedOperationException("Subspace projection needs an orthonormal basis",
                                            kind=transform.kind.value)
    coefficients = transform.analysis(v)
    masked = np.zeros_like(coefficients)
    idx = np.asarray(indices, dtype=int)
    masked[idx] = coefficients[idx]
    return transform.synthesis(masked)


def project_descent_cone_l1(g: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Projection onto the tangent cone of the l1 norm at x.

    Computed as g minus its projection onto the polar cone, the conic hull of
    the subdifferential; the scale of that hull is the root of a monotone
    piecewise-linear equation.
    """
    g = np.asarray(g, dtype=float)
    x = np.asarray(x, dtype=float)
    if g.shape != x.shape:
        raise DimensionMismatchException("Direction and reference differ in length", expected=x.shape, actual=g.shape)
    on_support = x != 0
    k = int(on_support.sum())
    if k == 0:
        raise ParameterException("The descent cone at 0 is trivial", parameter="x")
    signs = np.sign(x[on_support])
    tau = descent_cone_scale(g[on_support] @ signs, np.abs(g[~on_support]), k)
    polar = np.empty_like(g)
    polar[on_support] = tau * signs
    polar[~on_support] = np.clip(g[~on_support], -tau, tau)
    return g - polar


def descent_cone_scale(correlation: float, off_support: np.ndarray, k: int) -> float:
    """Root in tau >= 0 of k*tau - correlation - sum((off_support - tau)_+)."""
    if k * 0.0 - correlation - off_support.sum() >= 0:
        return 0.0
    a = np.sort(off_support)[::-1]
    partial = np.concatenate(([0.0], np.cumsum(a)))
    counts = np.arange(a.shape[0] + 1)
    candidates = (correlation + partial) / (k + counts)
    upper = np.concatenate(([np.inf], a))
    lower = np.concatenate((a, [0.0]))
    valid = (candidates <= upper + 1e-15) & (candidates >= lower - 1e-15)
    return float(max(candidates[np.argmax(valid)], 0.0))


def project(constraint: ConstraintSet, v: np.ndarray) -> np.ndarray:
    """Exact projection onto a ConstraintSet."""
    v = np.asarray(v, dtype=float)
    if v.shape != (constraint.dimension,):
        raise DimensionMismatchException("Vector does not match the set", expected=constraint.dimension,
                                         actual=v.shape)
    if constraint.kind == ConstraintKind.L1_BALL:
        return project_l1_ball(v, constraint.radius)
    if constraint.kind == ConstraintKind.K_SPARSE:
        return project_k_sparse(v, constraint.k)
    if constraint.kind == ConstraintKind.TREE_SPARSE:
        return project_tree_sparse(v, constraint.k, constraint.tree)
    return project_subspace(v, constraint.transform, constraint.indices)


def is_member(constraint: ConstraintSet, v: np.ndarray, tolerance: float = 1e-12) -> bool:
    v = np.asarray(v, dtype=float)
    if v.shape != (constraint.dimension,):
        return False
    if constraint.kind == ConstraintKind.L1_BALL:
        return float(np.abs(v).sum()) <= constraint.radius * (1 + tolerance) + tolerance
    support = np.flatnonzero(v)
    if constraint.kind == ConstraintKind.K_SPARSE:
        return support.size <= constraint.k
    if constraint.kind == ConstraintKind.TREE_SPARSE:
        return len(constraint.tree.ancestor_closure(support)) <= constraint.k
    residual = v - project_subspace(v, constraint.transform, constraint.indices)
    return float(np.linalg.norm(residual)) <= tolerance * max(1.0, float(np.linalg.norm(v)))


def projection_cost(constraint: ConstraintSet, v: np.ndarray) -> int:
    """Operation-count model of one projection of v."""
    d = constraint.dimension
    if constraint.kind in (ConstraintKind.L1_BALL, ConstraintKind.K_SPARSE):
        return int(d * max(1.0, log2(d)))
    if constraint.kind == ConstraintKind.TREE_SPARSE:
        size = (1 << effective_tree_levels(v)) - 1
        return size * min(constraint.k, size) ** 2
    return 2 * constraint.transform.apply_cost + d


def rooted_subtrees(tree: TreeTopology, size: int) -> list[frozenset]:
    """All rooted subtrees with exactly `size` nodes."""
    return list(_subtrees_at(0, size, tree.size))


@lru_cache(maxsize=None)
def _subtrees_at(index: int, size: int, d: int) -> tuple:
    if size == 0:
        return (frozenset(),)
    if index >= d:
        return ()
    out = []
    for left_size in range(size):
        for left in _subtrees_at(2 * index + 1, left_size, d):
            for right in _subtrees_at(2 * index + 2, size - 1 - left_size, d):
                out.append(frozenset((index,)) | left | right)
    return tuple(out)


@lru_cache(maxsize=None)
def rooted_subtree_count(levels: int, size: int) -> int:
    """Number of rooted subtrees of `size` nodes in a complete tree of `levels` levels."""
    if size == 0:
        return 1
    if levels == 0:
        return 0
    return sum(
        rooted_subtree_count(levels - 1, a) * rooted_subtree_count(levels - 1, size - 1 - a)
        for a in range(size)
    )
