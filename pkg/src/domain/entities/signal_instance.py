from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np

from src.shared.exceptions import DimensionMismatchException, ValidationException
from src.domain.value_objects.tree_topology import TreeTopology


class GeneratorKind(str, Enum):
    TREE_SPARSE = "tree-sparse"
    CLUSTERED_SPARSE = "clustered-sparse"
    COEFFICIENT_DECAY = "coefficient-decay"
    SPARSE_CODE = "sparse-code"
    CUSTOM = "custom"


@dataclass(frozen=True)
class SignalGenerator:
    """How a signal was produced: kind, parameters and seed."""
    kind: GeneratorKind
    params: Dict[str, Any] = field(default_factory=dict, compare=False)
    seed: Optional[int] = None


@dataclass(frozen=True)
class SignalInstance:
    """Domain entity holding a ground-truth vector x and its provenance."""
    x: np.ndarray = field(compare=False)
    generator: SignalGenerator

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1 or x.shape[0] < 1:
            raise DimensionMismatchException("Signal must be a non-empty vector", actual=x.shape)
        if not np.all(np.isfinite(x)):
            raise ValidationException("Signal entries must be finite", field="x")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        if self.generator.kind == GeneratorKind.TREE_SPARSE:
            tree = TreeTopology.from_dimension(x.shape[0])
            closure = tree.ancestor_closure(np.flatnonzero(x))
            if len(closure) > self.generator.params.get("k", x.shape[0]):
                raise ValidationException("Tree-sparse signal must sit on a rooted subtree of size <= k", field="x")

    @classmethod
    def custom(cls, x, **params) -> 'SignalInstance':
        return cls(x=np.asarray(x, dtype=float), generator=SignalGenerator(GeneratorKind.CUSTOM, dict(params)))

    @property
    def d(self) -> int:
        return self.x.shape[0]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.x))

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.x)
