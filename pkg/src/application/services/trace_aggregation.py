"""
Reduction of per-trial convergence traces to the aggregated CSV layout.
Traces are reduced in trial-index order.
"""
from typing import List, Sequence

import numpy as np

from src.domain.entities.convergence_trace import ConvergenceTrace
from src.shared.exceptions import ValidationException

AGGREGATE_COLUMNS = [
    "t",
    "err_mean",
    "err_stderr",
    "rel_err_mean",
    "objective_mean",
    "seconds_mean",
    "operations",
    "operations_cumulative",
]
RAW_COLUMNS = ["t", "err", "objective", "seconds", "operations"]


def aggregate_traces(traces: Sequence[ConvergenceTrace]) -> List[dict]:
    """Mean and standard error across trials at every iteration."""
    if not traces:
        raise ValidationException("No traces to aggregate", field="traces")
    lengths = {len(trace.records) for trace in traces}
    if len(lengths) != 1:
        raise ValidationException("Traces differ in length", field="traces", value=sorted(lengths))

    errors = np.vstack([trace.errors() for trace in traces])
    relative = np.vstack([trace.relative_errors() for trace in traces])
    objectives = np.vstack([trace.objectives() for trace in traces])
    seconds = np.vstack([trace.seconds() for trace in traces])
    operations = np.vstack([trace.operations() for trace in traces]).astype(float)

    n = len(traces)
    err_stderr = errors.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(errors.shape[1])
    mean_operations = operations.mean(axis=0)
    cumulative = np.cumsum(mean_operations)
    return [
        {
            "t": int(t),
            "err_mean": float(errors[:, t].mean()),
            "err_stderr": float(err_stderr[t]),
            "rel_err_mean": float(relative[:, t].mean()),
            "objective_mean": float(objectives[:, t].mean()),
            "seconds_mean": float(seconds[:, t].mean()),
            "operations": float(mean_operations[t]),
            "operations_cumulative": float(cumulative[t]),
        }
        for t in range(errors.shape[1])
    ]


def final_relative_error(rows: Sequence[dict]) -> float:
    return rows[-1]["rel_err_mean"]


def relative_error_at(rows: Sequence[dict], t: int) -> float:
    return rows[t]["rel_err_mean"]


def total_operations(rows: Sequence[dict]) -> float:
    return rows[-1]["operations_cumulative"]
