from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from math import log2, prod
from typing import Optional

import numpy as np
from scipy import fft

from src.shared.exceptions import DimensionMismatchException, ValidationException


class TransformKind(str, Enum):
    IDENTITY = "identity"
    DCT = "dct"
    HAAR = "haar"
    REDUNDANT_DCT = "redundant-dct"
    COMPOSED = "composed"


@dataclass(frozen=True)
class Transform:
    """Linear analysis/synthesis pair.

    `analysis` maps a vector of length `input_size` to its coefficients and
    `synthesis` is its adjoint. For the orthonormal kinds the two are inverses.
    A composed transform applies `outer.analysis` after `inner.synthesis`, so it
    maps the coefficient domain of `inner` to the coefficient domain of `outer`.
    """
    kind: TransformKind
    shape: tuple[int, ...] = ()
    atoms: Optional[int] = None
    outer: Optional['Transform'] = None
    inner: Optional['Transform'] = None

    def __post_init__(self):
        if self.kind == TransformKind.COMPOSED:
            if self.outer is None or self.inner is None:
                raise ValidationException("Composed transform needs outer and inner", field="kind")
            if self.outer.input_size != self.inner.input_size:
                raise DimensionMismatchException(
                    "Composed transforms must share their signal domain",
                    expected=self.inner.input_size,
                    actual=self.outer.input_size,
                )
            return
        if not self.shape or len(self.shape) > 2 or any(n < 1 for n in self.shape):
            raise ValidationException("Transforms act on 1D or 2D signals", field="shape", value=self.shape)
        if self.kind == TransformKind.HAAR and any(n & (n - 1) for n in self.shape):
            raise ValidationException("Haar transform needs dyadic lengths", field="shape", value=self.shape)
        if self.kind == TransformKind.REDUNDANT_DCT:
            if len(self.shape) != 1 or self.atoms is None or self.atoms < self.shape[0]:
                raise ValidationException(
                    "Redundant DCT dictionary needs n rows and d >= n atoms", field="atoms", value=self.atoms
                )

    # Factories

    @classmethod
    def identity(cls, n: int) -> 'Transform':
        return cls(kind=TransformKind.IDENTITY, shape=(n,))

    @classmethod
    def dct(cls, *shape: int) -> 'Transform':
        return cls(kind=TransformKind.DCT, shape=tuple(shape))

    @classmethod
    def haar(cls, *shape: int) -> 'Transform':
        return cls(kind=TransformKind.HAAR, shape=tuple(shape))

    @classmethod
    def redundant_dct(cls, n: int, d: int) -> 'Transform':
        return cls(kind=TransformKind.REDUNDANT_DCT, shape=(n,), atoms=d)

    @classmethod
    def composed(cls, outer: 'Transform', inner: 'Transform') -> 'Transform':
        return cls(kind=TransformKind.COMPOSED, outer=outer, inner=inner)

    # Dimensions

    @property
    def input_size(self) -> int:
        if self.kind == TransformKind.COMPOSED:
            return self.inner.coefficient_size
        return prod(self.shape)

    @property
    def coefficient_size(self) -> int:
        if self.kind == TransformKind.COMPOSED:
            return self.outer.coefficient_size
        if self.kind == TransformKind.REDUNDANT_DCT:
            return self.atoms
        return prod(self.shape)

    @property
    def is_orthonormal(self) -> bool:
        if self.kind == TransformKind.COMPOSED:
            return self.outer.is_orthonormal and self.inner.is_orthonormal
        return self.kind != TransformKind.REDUNDANT_DCT

    @property
    def apply_cost(self) -> int:
        """Operation-count model of one analysis or synthesis."""
        if self.kind == TransformKind.COMPOSED:
            return self.outer.apply_cost + self.inner.apply_cost
        n = self.input_size
        if self.kind == TransformKind.IDENTITY:
            return 0
        if self.kind == TransformKind.DCT:
            return int(n * max(1.0, log2(n)))
        if self.kind == TransformKind.HAAR:
            return 2 * n
        return n * self.coefficient_size

    # Application

    def analysis(self, v: np.ndarray) -> np.ndarray:
        v = self._check(v, self.input_size)
        if self.kind == TransformKind.IDENTITY:
            return v.copy()
        if self.kind == TransformKind.DCT:
            return fft.dctn(v.reshape(self.shape), norm="ortho").ravel()
        if self.kind == TransformKind.HAAR:
            return _haar_analysis(v, self.shape)
        if self.kind == TransformKind.REDUNDANT_DCT:
            return redundant_dct_dictionary(self.shape[0], self.atoms).T @ v
        return self.outer.analysis(self.inner.synthesis(v))

    def synthesis(self, c: np.ndarray) -> np.ndarray:
        c = self._check(c, self.coefficient_size)
        if self.kind == TransformKind.IDENTITY:
            return c.copy()
        if self.kind == TransformKind.DCT:
            return fft.idctn(c.reshape(self.shape), norm="ortho").ravel()
        if self.kind == TransformKind.HAAR:
            return _haar_synthesis(c, self.shape)
        if self.kind == TransformKind.REDUNDANT_DCT:
            return redundant_dct_dictionary(self.shape[0], self.atoms) @ c
        return self.inner.analysis(self.outer.synthesis(c))

    def synthesis_matrix(self) -> np.ndarray:
        """Dense (input_size x coefficient_size) matrix of `synthesis`."""
        if self.kind == TransformKind.REDUNDANT_DCT:
            return redundant_dct_dictionary(self.shape[0], self.atoms).copy()
        eye = np.eye(self.coefficient_size)
        return np.column_stack([self.synthesis(eye[:, j]) for j in range(self.coefficient_size)])

    @staticmethod
    def _check(v: np.ndarray, size: int) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.ndim != 1 or v.shape[0] != size:
            raise DimensionMismatchException("Transform input has the wrong length", expected=size, actual=v.shape)
        return v


@lru_cache(maxsize=16)
def redundant_dct_dictionary(n: int, d: int) -> np.ndarray:
    """n x d dictionary with entries cos(pi*i*(j+1/2)/d), unit-norm columns."""
    i = np.arange(n)[:, None]
    j = np.arange(d)[None, :]
    D = np.cos(np.pi * i * (j + 0.5) / d)
    D /= np.linalg.norm(D, axis=0, keepdims=True)
    D.setflags(write=False)
    return D


@lru_cache(maxsize=16)
def haar_matrix(n: int) -> np.ndarray:
    """Orthonormal Haar analysis matrix, rows ordered coarse to fine."""
    H = np.zeros((n, n))
    H[0, :] = 1.0 / np.sqrt(n)
    levels = n.bit_length() - 1
    for j in range(levels):
        length = n >> j
        half = length // 2
        for p in range(1 << j):
            row = (1 << j) + p
            start = p * length
            H[row, start:start + half] = 1.0 / np.sqrt(length)
            H[row, start + half:start + length] = -1.0 / np.sqrt(length)
    H.setflags(write=False)
    return H


@lru_cache(maxsize=16)
def haar_row_levels(n: int) -> np.ndarray:
    """Resolution level of every Haar row (0 = scaling function)."""
    levels = np.array([0] + [r.bit_length() for r in range(1, n)], dtype=int)
    levels.setflags(write=False)
    return levels


@lru_cache(maxsize=16)
def haar_order_2d(rows: int, cols: int) -> np.ndarray:
    """Flat positions of the separable 2D Haar coefficients, coarse to fine."""
    row_levels = haar_row_levels(rows)
    col_levels = haar_row_levels(cols)
    keys = sorted(
        (max(row_levels[i], col_levels[j]), i, j) for i in range(rows) for j in range(cols)
    )
    order = np.array([i * cols + j for _, i, j in keys], dtype=int)
    order.setflags(write=False)
    return order


def _haar_analysis(v: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if len(shape) == 1:
        return haar_matrix(shape[0]) @ v
    rows, cols = shape
    coefficients = haar_matrix(rows) @ v.reshape(shape) @ haar_matrix(cols).T
    return coefficients.ravel()[haar_order_2d(rows, cols)]


def _haar_synthesis(c: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if len(shape) == 1:
        return haar_matrix(shape[0]).T @ c
    rows, cols = shape
    flat = np.empty(rows * cols)
    flat[haar_order_2d(rows, cols)] = c
    return (haar_matrix(rows).T @ flat.reshape(shape) @ haar_matrix(cols)).ravel()
