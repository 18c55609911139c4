"""
Application services module.
Signal factories, projections, solvers, estimators, training and experiments.
"""

from .experiment_service import ExperimentResult, ExperimentService
from .solver_service import run_ipgd, run_pgd, run_solver

__all__ = [
    "ExperimentResult",
    "ExperimentService",
    "run_ipgd",
    "run_pgd",
    "run_solver",
]
