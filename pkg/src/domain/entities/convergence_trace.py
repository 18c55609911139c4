from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np


@dataclass
class TraceRecord:
    t: int
    error: Optional[float]
    objective: float
    seconds: float
    operations: int


@dataclass
class ConvergenceTrace:
    """Per-iteration record of a solver run; record 0 is the initial point."""
    algorithm: str
    label: str
    norm_x: Optional[float] = None
    records: List[TraceRecord] = field(default_factory=list)
    iterates: Dict[int, np.ndarray] = field(default_factory=dict)

    def record(
        self,
        t: int,
        z: np.ndarray,
        objective: float,
        seconds: float,
        operations: int,
        x: Optional[np.ndarray] = None,
        store: bool = False,
    ) -> None:
        error = None if x is None else float(np.linalg.norm(z - x))
        self.records.append(TraceRecord(t, error, float(objective), float(seconds), int(operations)))
        if store:
            self.iterates[t] = z.copy()

    @property
    def iterations(self) -> int:
        return len(self.records) - 1

    @property
    def final_iterate(self) -> Optional[np.ndarray]:
        if not self.iterates:
            return None
        return self.iterates[max(self.iterates)]

    def errors(self) -> np.ndarray:
        return np.array([np.nan if r.error is None else r.error for r in self.records])

    def relative_errors(self) -> np.ndarray:
        if not self.norm_x:
            return np.full(len(self.records), np.nan)
        return self.errors() / self.norm_x

    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])

    def seconds(self) -> np.ndarray:
        return np.array([r.seconds for r in self.records])

    def operations(self) -> np.ndarray:
        return np.array([r.operations for r in self.records], dtype=np.int64)

    def to_rows(self) -> List[dict]:
        """Rows for the `t,err,objective,seconds,operations` CSV layout."""
        return [
            {
                "t": r.t,
                "err": r.error,
                "objective": r.objective,
                "seconds": r.seconds,
                "operations": r.operations,
            }
            for r in self.records
        ]
