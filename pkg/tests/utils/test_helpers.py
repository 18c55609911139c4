"""
Test helper utilities: brute-force oracles the fast implementations are checked against.
"""

from itertools import combinations, product
from typing import Callable, Iterable, List

import numpy as np
from scipy import special


class ProjectionOracles:
    """Exhaustive reference projections for small dimensions."""

    @staticmethod
    def rooted_subtrees_up_to(d: int, k: int) -> List[tuple]:
        """Every nonempty rooted subtree of at most k nodes, by subset enumeration."""
        out = []
        for size in range(1, k + 1):
            for subset in combinations(range(d), size):
                nodes = set(subset)
                if 0 in nodes and all(i == 0 or (i - 1) // 2 in nodes for i in nodes):
                    out.append(subset)
        return out

    @staticmethod
    def best_support_projection(v: np.ndarray, supports: Iterable[tuple]) -> np.ndarray:
        """Keep the support that retains the most energy."""
        best, best_energy = None, -1.0
        for support in supports:
            energy = float(np.sum(v[list(support)] ** 2))
            if energy > best_energy:
                best, best_energy = support, energy
        out = np.zeros_like(v)
        out[list(best)] = v[list(best)]
        return out

    @staticmethod
    def l1_ball_grid_distance(v: np.ndarray, radius: float, samples: int = 20000, seed: int = 0) -> float:
        """Smallest distance from v to random points on the l1 sphere (an upper bound on the true distance)."""
        rng = np.random.default_rng(seed)
        points = rng.laplace(size=(samples, v.shape[0]))
        points *= radius / np.abs(points).sum(axis=1, keepdims=True)
        return float(np.min(np.linalg.norm(points - v, axis=1)))

    @staticmethod
    def l1_ball_by_faces(v: np.ndarray, radius: float) -> np.ndarray:
        """Exact l1-ball projection by enumerating every face of the sphere.

        On the face with support S and the signs of v, the nearest point is
        v_S shifted by a common amount along the signs; the projection is the
        closest of these points that keeps the signs of v.
        """
        v = np.asarray(v, dtype=float)
        if np.abs(v).sum() <= radius:
            return v.copy()
        nonzero = np.flatnonzero(v)
        masks = np.array(list(product([False, True], repeat=nonzero.size))[1:], dtype=bool)
        magnitudes = np.abs(v[nonzero])
        shift = ((masks * magnitudes).sum(axis=1) - radius) / masks.sum(axis=1)
        kept = np.where(masks, magnitudes - shift[:, None], 0.0)
        feasible = np.all(kept >= -1e-15, axis=1)
        candidates = np.zeros((masks.shape[0], v.shape[0]))
        candidates[:, nonzero] = np.sign(v[nonzero]) * np.maximum(kept, 0.0)
        distances = np.linalg.norm(candidates - v, axis=1)
        distances[~feasible] = np.inf
        return candidates[int(np.argmin(distances))]

    @staticmethod
    def max_pair_norm(G: np.ndarray, supports: List[tuple]) -> float:
        """Largest spectral norm of G restricted to any pair of supports."""
        return max(
            float(np.linalg.norm(G[np.ix_(list(a), list(b))], 2)) for a in supports for b in supports
        )


class NumericHelpers:
    """Finite differences and closed forms used by the tests."""

    @staticmethod
    def finite_difference(loss: Callable[[], float], array: np.ndarray, index: tuple, step: float = 1e-6) -> float:
        """Central difference of `loss` along one entry of `array`, restored afterwards."""
        original = array[index]
        array[index] = original + step
        plus = loss()
        array[index] = original - step
        minus = loss()
        array[index] = original
        return (plus - minus) / (2 * step)

    @staticmethod
    def chi_mean(n: int) -> float:
        """E||g|| for g ~ N(0, I_n)."""
        return float(np.sqrt(2.0) * np.exp(special.gammaln((n + 1) / 2) - special.gammaln(n / 2)))

    @staticmethod
    def lasso_objective(z: np.ndarray, y: np.ndarray, M: np.ndarray, lam: float) -> float:
        residual = y - M @ z
        return float(residual @ residual + lam * np.abs(z).sum())
