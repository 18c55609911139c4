from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from src.shared.exceptions import ParameterException, ValidationException

from .constraint_set import ConstraintSet
from .inexact_operator import InexactOperator


class Algorithm(str, Enum):
    PGD = "pgd"
    ISTA = "ista"
    IPGD = "ipgd"
    UNROLLED = "unrolled"


class StepPolicy(str, Enum):
    CONSERVATIVE = "conservative"
    AGGRESSIVE = "aggressive"
    LIPSCHITZ = "lipschitz"


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of one solver run. Stopping is by iteration budget only."""
    algorithm: Algorithm
    step_size: float
    max_iterations: int
    constraint: Optional[ConstraintSet] = None
    inexact: Optional[InexactOperator] = None
    lam: float = 0.0
    initial: Optional[np.ndarray] = field(default=None, compare=False)
    store_every: int = 1
    label: str = ""

    def __post_init__(self):
        if not self.step_size > 0:
            raise ParameterException("Step size must be positive", parameter="step_size", value=self.step_size)
        if self.max_iterations < 0:
            raise ParameterException("Iteration budget must be non-negative", parameter="max_iterations",
                                     value=self.max_iterations)
        if self.lam < 0:
            raise ParameterException("lambda must be non-negative", parameter="lam", value=self.lam)
        if self.store_every < 1:
            raise ParameterException("store_every must be positive", parameter="store_every", value=self.store_every)
        if self.algorithm in (Algorithm.PGD, Algorithm.IPGD) and self.constraint is None:
            raise ValidationException(f"{self.algorithm.value} needs a constraint set", field="constraint")
        if self.algorithm == Algorithm.IPGD and self.inexact is None:
            raise ValidationException("ipgd needs an inexact operator", field="inexact")

    @property
    def name(self) -> str:
        return self.label or self.algorithm.value
