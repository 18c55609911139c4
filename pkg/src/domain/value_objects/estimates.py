from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np

from src.shared.exceptions import ParameterException, ValidationException

from .tree_topology import TreeTopology


class ConeKind(str, Enum):
    L1_DESCENT_CONE = "l1-descent-cone"
    SPARSE_DIFFERENCE = "sparse-difference"
    TREE_DIFFERENCE = "tree-difference"
    SUBSPACE = "subspace"


class EstimateMethod(str, Enum):
    CLOSED_FORM = "closed-form"
    MONTE_CARLO = "monte-carlo"
    BRUTE_FORCE = "brute-force"
    ALTERNATING_MAXIMIZATION = "alternating-maximization"


@dataclass(frozen=True)
class ConeDescriptor:
    """A set or cone whose width or restricted rate is estimated."""
    kind: ConeKind
    dimension: int
    k: Optional[int] = None
    indices: tuple[int, ...] = ()
    reference: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.kind in (ConeKind.SPARSE_DIFFERENCE, ConeKind.TREE_DIFFERENCE):
            if self.k is None or not 1 <= self.k <= self.dimension:
                raise ParameterException("Sparsity must satisfy 1 <= k <= d", parameter="k", value=self.k)
            if self.kind == ConeKind.TREE_DIFFERENCE:
                TreeTopology.from_dimension(self.dimension)
        if self.kind == ConeKind.SUBSPACE and any(not 0 <= i < self.dimension for i in self.indices):
            raise ValidationException("Subspace index out of range", field="indices")
        if self.kind == ConeKind.L1_DESCENT_CONE:
            if self.reference is None or len(self.reference) != self.dimension:
                raise ValidationException("Descent cone needs a reference signal of length d", field="reference")

    @classmethod
    def sparse_difference(cls, dimension: int, k: int) -> 'ConeDescriptor':
        return cls(kind=ConeKind.SPARSE_DIFFERENCE, dimension=dimension, k=k)

    @classmethod
    def tree_difference(cls, dimension: int, k: int) -> 'ConeDescriptor':
        return cls(kind=ConeKind.TREE_DIFFERENCE, dimension=dimension, k=k)

    @classmethod
    def subspace(cls, dimension: int, indices) -> 'ConeDescriptor':
        return cls(kind=ConeKind.SUBSPACE, dimension=dimension, indices=tuple(sorted(int(i) for i in indices)))

    @classmethod
    def l1_descent_cone(cls, x: np.ndarray) -> 'ConeDescriptor':
        x = np.asarray(x, dtype=float)
        return cls(kind=ConeKind.L1_DESCENT_CONE, dimension=x.shape[0], reference=tuple(float(v) for v in x))

    @property
    def is_convex(self) -> bool:
        return self.kind in (ConeKind.L1_DESCENT_CONE, ConeKind.SUBSPACE)

    @property
    def kappa(self) -> int:
        return 1 if self.is_convex else 2

    @property
    def support_size(self) -> int:
        """Largest support of a member of the set."""
        if self.kind == ConeKind.SUBSPACE:
            return len(self.indices)
        if self.kind in (ConeKind.SPARSE_DIFFERENCE, ConeKind.TREE_DIFFERENCE):
            return min(2 * self.k, self.dimension)
        return self.dimension


@dataclass(frozen=True)
class WidthEstimate:
    """Gaussian mean width of a set intersected with the unit ball."""
    value: float
    stderr: float
    samples: int
    method: EstimateMethod
    is_lower_bound: bool = False
    is_upper_bound: bool = False
    note: str = ""

    def __post_init__(self):
        if self.value < 0:
            raise ValidationException("Width must be non-negative", field="value", value=self.value)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "stderr": self.stderr,
            "samples": self.samples,
            "method": self.method.value,
            "is_lower_bound": self.is_lower_bound,
            "is_upper_bound": self.is_upper_bound,
            "note": self.note,
        }


@dataclass(frozen=True)
class RhoEstimate:
    """Restricted norm of I - mu*M'M over a set (optionally seen through p)."""
    value: float
    method: EstimateMethod
    kappa: int
    is_lower_bound: bool
    evaluated: int = 0

    def __post_init__(self):
        if self.value < 0:
            raise ValidationException("Rate must be non-negative", field="value", value=self.value)
        if self.kappa not in (1, 2):
            raise ValidationException("kappa is 1 or 2", field="kappa", value=self.kappa)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "stderr": 0.0,
            "samples": self.evaluated,
            "method": self.method.value,
            "kappa": self.kappa,
            "is_lower_bound": self.is_lower_bound,
        }


@dataclass(frozen=True)
class BoundParameters:
    """Inputs of the convergence bounds; gamma is derived from the others."""
    rho: float
    rho_p: float
    kappa: int
    epsilon: float
    norm_x: float
    gamma: float = field(init=False)

    def __post_init__(self):
        if self.kappa not in (1, 2):
            raise ValidationException("kappa is 1 or 2", field="kappa", value=self.kappa)
        for name in ("rho", "rho_p", "epsilon", "norm_x"):
            if getattr(self, name) < 0:
                raise ParameterException(f"{name} must be non-negative", parameter=name, value=getattr(self, name))
        object.__setattr__(
            self, "gamma", (2 * self.rho * self.kappa + self.rho_p * self.kappa + 1) * self.epsilon
        )


@dataclass(frozen=True)
class ProjectionReport:
    """Model error of an inexact operator at a signal."""
    output: np.ndarray = field(compare=False)
    epsilon_convex: float
    epsilon_sufficient: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epsilon_convex": self.epsilon_convex,
            "epsilon_sufficient": self.epsilon_sufficient,
            "output": self.output.tolist(),
        }


@dataclass(frozen=True)
class RateWidthRelation:
    rho_conservative: float
    rho_aggressive_order: float
