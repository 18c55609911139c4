from dataclasses import dataclass
from enum import Enum
from typing import Optional

from src.shared.exceptions import DimensionMismatchException, ParameterException, ValidationException

from .transform import Transform
from .tree_topology import TreeTopology


class ConstraintKind(str, Enum):
    L1_BALL = "l1-ball"
    K_SPARSE = "k-sparse"
    TREE_SPARSE = "tree-sparse"
    COEFFICIENT_SUBSET = "coefficient-subset"


@dataclass(frozen=True)
class ConstraintSet:
    """The set K that iterates are projected onto."""
    kind: ConstraintKind
    dimension: int
    radius: Optional[float] = None
    k: Optional[int] = None
    transform: Optional[Transform] = None
    indices: tuple[int, ...] = ()

    def __post_init__(self):
        if self.dimension < 1:
            raise ValidationException("Dimension must be positive", field="dimension", value=self.dimension)
        if self.kind == ConstraintKind.L1_BALL:
            if self.radius is None or not self.radius > 0:
                raise ParameterException("l1-ball radius must be positive", parameter="radius", value=self.radius)
        elif self.kind in (ConstraintKind.K_SPARSE, ConstraintKind.TREE_SPARSE):
            if self.k is None or not 1 <= self.k <= self.dimension:
                raise ParameterException("Sparsity must satisfy 1 <= k <= d", parameter="k", value=self.k)
            if self.kind == ConstraintKind.TREE_SPARSE:
                TreeTopology.from_dimension(self.dimension)
        elif self.kind == ConstraintKind.COEFFICIENT_SUBSET:
            if self.transform is None or not self.transform.is_orthonormal:
                raise ValidationException(
                    "Coefficient-subset sets need an orthonormal basis", field="transform"
                )
            if self.transform.input_size != self.dimension:
                raise DimensionMismatchException(
                    "Basis does not match the set dimension",
                    expected=self.dimension,
                    actual=self.transform.input_size,
                )
            if any(not 0 <= i < self.transform.coefficient_size for i in self.indices):
                raise ValidationException("Coefficient index out of range", field="indices")

    @classmethod
    def l1_ball(cls, dimension: int, radius: float) -> 'ConstraintSet':
        return cls(kind=ConstraintKind.L1_BALL, dimension=dimension, radius=float(radius))

    @classmethod
    def k_sparse(cls, dimension: int, k: int) -> 'ConstraintSet':
        return cls(kind=ConstraintKind.K_SPARSE, dimension=dimension, k=int(k))

    @classmethod
    def tree_sparse(cls, dimension: int, k: int) -> 'ConstraintSet':
        return cls(kind=ConstraintKind.TREE_SPARSE, dimension=dimension, k=int(k))

    @classmethod
    def coefficient_subset(cls, transform: Transform, indices) -> 'ConstraintSet':
        return cls(
            kind=ConstraintKind.COEFFICIENT_SUBSET,
            dimension=transform.input_size,
            transform=transform,
            indices=tuple(sorted(int(i) for i in indices)),
        )

    @property
    def is_convex(self) -> bool:
        return self.kind in (ConstraintKind.L1_BALL, ConstraintKind.COEFFICIENT_SUBSET)

    @property
    def kappa(self) -> int:
        """1 for convex sets, 2 otherwise."""
        return 1 if self.is_convex else 2

    @property
    def tree(self) -> TreeTopology:
        return TreeTopology.from_dimension(self.dimension)
