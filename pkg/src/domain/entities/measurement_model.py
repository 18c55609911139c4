from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np

from src.shared.exceptions import DimensionMismatchException, ValidationException

from .signal_instance import SignalInstance


class EnsembleKind(str, Enum):
    IID_GAUSSIAN = "iid-gaussian"
    REDUNDANT_DCT = "redundant-dct"
    COMPOSED = "composed"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Ensemble:
    """Description of how M was drawn or built."""
    kind: EnsembleKind
    params: Dict[str, Any] = field(default_factory=dict, compare=False)
    seed: Optional[int] = None


@dataclass(frozen=True)
class MeasurementModel:
    """Domain entity for y = M x + e.

    `signal` is the instance the measurements were taken from, when known; the
    solvers use it to report the error of their iterates.
    """
    matrix: np.ndarray = field(compare=False)
    noise: np.ndarray = field(compare=False)
    y: np.ndarray = field(compare=False)
    ensemble: Ensemble
    signal: Optional[SignalInstance] = field(default=None, compare=False)

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        if M.ndim != 2:
            raise DimensionMismatchException("Measurement matrix must be 2D", actual=M.shape)
        for name in ("noise", "y"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (M.shape[0],):
                raise DimensionMismatchException(f"{name} must have length m", expected=M.shape[0], actual=v.shape)
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)
        if self.signal is not None:
            if self.signal.d != M.shape[1]:
                raise DimensionMismatchException("Signal does not match M", expected=M.shape[1], actual=self.signal.d)
            if not self.consistent_with(self.signal):
                raise ValidationException("y differs from M x + e", field="y")

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def d(self) -> int:
        return self.matrix.shape[1]

    @property
    def x(self) -> Optional[np.ndarray]:
        return None if self.signal is None else self.signal.x

    def consistent_with(self, signal: SignalInstance, tolerance: float = 1e-12) -> bool:
        residual = self.y - (self.matrix @ signal.x + self.noise)
        return float(np.linalg.norm(residual)) <= tolerance * max(signal.norm, 1.0)

    def residual(self, z: np.ndarray) -> np.ndarray:
        return self.y - self.matrix @ z
