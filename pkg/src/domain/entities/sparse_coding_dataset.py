from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.shared.exceptions import DimensionMismatchException, ParameterException


@dataclass(frozen=True)
class SparseCodingDataset:
    """Measurements Y (N x m) of codes (N x d) through M, with training targets.

    `targets` are either the generating codes or a reference solver's output;
    `lam` is the weight of the l1 term in the objective ||y - Mz||^2 + lam ||z||_1.
    """
    measurements: np.ndarray
    codes: np.ndarray
    targets: np.ndarray
    matrix: np.ndarray
    lam: float

    def __post_init__(self):
        n = self.measurements.shape[0]
        if self.measurements.shape != (n, self.matrix.shape[0]):
            raise DimensionMismatchException("Measurements must be N x m", actual=self.measurements.shape)
        for name in ("codes", "targets"):
            if getattr(self, name).shape != (n, self.matrix.shape[1]):
                raise DimensionMismatchException(f"{name} must be N x d", actual=getattr(self, name).shape)
        if self.lam < 0:
            raise ParameterException("lambda must be non-negative", parameter="lam", value=self.lam)

    def __len__(self) -> int:
        return self.measurements.shape[0]

    def subset(self, indices) -> 'SparseCodingDataset':
        indices = np.asarray(indices, dtype=int)
        return SparseCodingDataset(
            measurements=self.measurements[indices],
            codes=self.codes[indices],
            targets=self.targets[indices],
            matrix=self.matrix,
            lam=self.lam,
        )

    def with_targets(self, targets: np.ndarray) -> 'SparseCodingDataset':
        return SparseCodingDataset(self.measurements, self.codes, targets, self.matrix, self.lam)

    def split(self, validation_fraction: float, rng: Optional[np.random.Generator] = None):
        """Random (train, validation) split; validation is the train set when the fraction is 0."""
        n = len(self)
        order = (rng or np.random.default_rng(0)).permutation(n)
        n_val = int(round(n * validation_fraction))
        if validation_fraction > 0 and (n_val == 0 or n_val >= n):
            raise ParameterException(
                f"Cannot hold out {validation_fraction:.2f} of {n} samples",
                parameter="validation_fraction",
                value=validation_fraction,
            )
        if n_val == 0:
            train = self.subset(order)
            return train, train
        return self.subset(order[n_val:]), self.subset(order[:n_val])
