from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional

import numpy as np

from src.shared.exceptions import DimensionMismatchException, ParameterException


class Nonlinearity(str, Enum):
    SOFT_THRESHOLD = "soft-threshold"
    HARD_TOP_K = "hard-top-k"
    L1_BALL = "l1-ball-projection"


@dataclass
class UnrolledNetwork:
    """Weight-tied unrolled iteration z_{t+1} = phi(A y + U z_t).

    `lam` is the soft threshold itself (already scaled by the step size),
    `k` the kept count of hard-top-k and `radius` the l1-ball radius.
    """
    A: np.ndarray
    U: np.ndarray
    nonlinearity: Nonlinearity
    layers: int
    lam: float = 0.0
    k: Optional[int] = None
    radius: Optional[float] = None

    def __post_init__(self):
        self.A = np.array(self.A, dtype=float)
        self.U = np.array(self.U, dtype=float)
        if self.A.ndim != 2 or self.U.shape != (self.A.shape[0], self.A.shape[0]):
            raise DimensionMismatchException(
                "U must be d x d for A of shape d x m", expected=(self.A.shape[0],) * 2, actual=self.U.shape
            )
        if self.layers < 1:
            raise ParameterException("Network needs at least one layer", parameter="layers", value=self.layers)
        if self.lam < 0:
            raise ParameterException("Threshold must be non-negative", parameter="lam", value=self.lam)
        if self.nonlinearity == Nonlinearity.HARD_TOP_K and (self.k is None or not 1 <= self.k <= self.d):
            raise ParameterException("hard-top-k needs 1 <= k <= d", parameter="k", value=self.k)
        if self.nonlinearity == Nonlinearity.L1_BALL and (self.radius is None or not self.radius > 0):
            raise ParameterException("l1-ball radius must be positive", parameter="radius", value=self.radius)

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[1]

    def copy(self) -> 'UnrolledNetwork':
        return replace(self, A=self.A.copy(), U=self.U.copy())


@dataclass
class MixtureModel:
    """J unrolled networks; each sample is routed to the network with the smallest objective."""
    networks: List[UnrolledNetwork]
    objective_history: List[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.networks:
            raise ParameterException("A mixture needs at least one network", parameter="J", value=0)

    @property
    def size(self) -> int:
        return len(self.networks)
