"""
Right-hand sides of the convergence bounds and the rate/width trend relation.
"""
import logging
from math import sqrt

import numpy as np

from src.domain.value_objects.estimates import BoundParameters, RateWidthRelation
from src.shared.exceptions import ParameterException

logger = logging.getLogger(__name__)

EXACT_PGD_THEOREMS = (1, 2)
INEXACT_PGD_THEOREMS = (3, 4)


def evaluate_bound(theorem: int, params: BoundParameters, t: int) -> float:
    """Error bound after t iterations, scaled by ||x||.

    1, 2: (kappa rho)^t
    3: rho_p^t + (1 - rho_p^t) / (1 - rho_p) (2 + rho_p) eps
    4: q^t + (1 - q^t) / (1 - q) gamma with q = kappa rho_p
    At q = 1 the geometric sum is replaced by its limit t.
    """
    if t < 0:
        raise ParameterException("Iteration index must be non-negative", parameter="t", value=t)
    if theorem in EXACT_PGD_THEOREMS:
        return (params.kappa * params.rho) ** t * params.norm_x
    if theorem == 3:
        return _geometric_bound(params.rho_p, (2.0 + params.rho_p) * params.epsilon, t) * params.norm_x
    if theorem == 4:
        return _geometric_bound(params.kappa * params.rho_p, params.gamma, t) * params.norm_x
    raise ParameterException("Theorem must be 1, 2, 3 or 4", parameter="theorem", value=theorem)


def _geometric_bound(q: float, floor: float, t: int) -> float:
    power = q ** t
    if q == 1.0:
        return power + t * floor
    return power + (1.0 - power) / (1.0 - q) * floor


def bound_curve(theorem: int, params: BoundParameters, iterations: int) -> np.ndarray:
    """evaluate_bound for t = 0..iterations."""
    return np.array([evaluate_bound(theorem, params, t) for t in range(iterations + 1)])


def rate_width_relation(m: int, d: int, width: float) -> RateWidthRelation:
    """Unit-constant forms 1 - (sqrt(m) - w)/(m + d) and w/sqrt(m); for trend checks only."""
    if m < 1 or d < 1:
        raise ParameterException("m and d must be positive", parameter="m, d", value=(m, d))
    if width < 0:
        raise ParameterException("Width must be non-negative", parameter="width", value=width)
    return RateWidthRelation(
        rho_conservative=1.0 - (sqrt(m) - width) / (m + d),
        rho_aggressive_order=width / sqrt(m),
    )


def first_violation(measured: np.ndarray, bound: np.ndarray, tolerance: float = 1e-9) -> int:
    """Index of the first t where the measured error exceeds the bound, -1 if none."""
    over = np.flatnonzero(np.asarray(measured) > np.asarray(bound) + tolerance)
    return int(over[0]) if over.size else -1
