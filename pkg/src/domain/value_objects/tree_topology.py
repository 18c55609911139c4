from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

from src.shared.exceptions import ParameterException


@dataclass(frozen=True)
class TreeTopology:
    """Complete binary tree in heap layout.

    Arrays are 0-based: the root (node 1) sits at index 0 and the children of
    index i are 2i+1 and 2i+2. Depth of the root is 1.
    """
    levels: int

    def __post_init__(self):
        if self.levels < 1:
            raise ParameterException("A tree needs at least one level", parameter="levels", value=self.levels)

    @classmethod
    def from_dimension(cls, d: int) -> 'TreeTopology':
        """Topology for d = 2^L - 1 nodes."""
        levels = int(d + 1).bit_length() - 1
        if d < 1 or (1 << levels) - 1 != d:
            raise ParameterException(
                f"Tree-structured vectors need d = 2^L - 1, got d={d}", parameter="d", value=d
            )
        return cls(levels=levels)

    @property
    def size(self) -> int:
        return (1 << self.levels) - 1

    @staticmethod
    def parent(index: int) -> int:
        return (index - 1) // 2

    def children(self, index: int) -> tuple[int, ...]:
        left = 2 * index + 1
        if left >= self.size:
            return ()
        return (left, left + 1)

    def level_range(self, level: int) -> range:
        """Indices of the nodes at `level` (1 = root)."""
        return range((1 << (level - 1)) - 1, (1 << level) - 1)

    def depths(self) -> np.ndarray:
        return _depths(self.levels)

    def prefix_size(self, levels: int) -> int:
        """Number of nodes in the first `levels` levels."""
        return (1 << min(levels, self.levels)) - 1

    def is_rooted_subtree(self, support: Iterable[int]) -> bool:
        nodes = set(int(i) for i in support)
        if not nodes:
            return True
        if 0 not in nodes or max(nodes) >= self.size or min(nodes) < 0:
            return False
        return all(i == 0 or self.parent(i) in nodes for i in nodes)

    def ancestor_closure(self, support: Iterable[int]) -> frozenset:
        """Smallest rooted subtree containing every index of `support`."""
        closure = set()
        for node in (int(i) for i in support):
            if not 0 <= node < self.size:
                raise ParameterException("Node outside the tree", parameter="support", value=node)
            while node not in closure:
                closure.add(node)
                if node == 0:
                    break
                node = self.parent(node)
        return frozenset(closure)


@lru_cache(maxsize=32)
def _depths(levels: int) -> np.ndarray:
    depths = np.array([(i + 1).bit_length() for i in range((1 << levels) - 1)], dtype=int)
    depths.setflags(write=False)
    return depths
