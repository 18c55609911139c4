"""
Concurrent trial execution for experiments and Monte Carlo estimators.
Every trial receives a seed derived from (base seed, trial index), and results
are returned in trial-index order so aggregation never depends on scheduling.
"""
import gc
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Generic, List, Optional, TypeVar

import numpy as np

try:
    import psutil
    PSUTIL_AVAILABLE = True
except ImportError:
    PSUTIL_AVAILABLE = False
    psutil = None

from .config.settings import get_settings
from .exceptions import ApplicationException, TrialProcessingException

R = TypeVar('R')

logger = logging.getLogger(__name__)


def derive_seed(seed: int, index: int) -> int:
    """Independent child seed for stream `index` of base `seed`."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


@dataclass
class TrialRunnerConfig:
    """Configuration for trial execution"""
    max_workers: int = 4
    enable_memory_monitoring: bool = True

    @classmethod
    def from_settings(cls):
        """Create TrialRunnerConfig from toolkit settings"""
        settings = get_settings()
        return cls(
            max_workers=settings.TRIAL_MAX_WORKERS,
            enable_memory_monitoring=settings.ENABLE_MEMORY_MONITORING,
        )


@dataclass
class TrialBatchResult(Generic[R]):
    """Ordered trial results with run statistics"""
    results: List[R]
    seeds: List[int]
    elapsed_seconds: float = 0.0
    memory_peak_mb: float = 0.0
    errors: List[str] = field(default_factory=list)


class MemoryMonitor:
    """Memory monitoring utility"""

    @staticmethod
    def get_memory_usage() -> float:
        """Get current resident memory in MB"""
        if not PSUTIL_AVAILABLE:
            return 0.0
        process = psutil.Process()
        return process.memory_info().rss / 1024 / 1024

    @staticmethod
    def force_garbage_collection():
        """Force garbage collection"""
        gc.collect()


class TrialRunner:
    """Runs independent seeded trials on a thread pool"""

    def __init__(self, config: Optional[TrialRunnerConfig] = None):
        self.config = config or TrialRunnerConfig.from_settings()
        self.memory_monitor = MemoryMonitor()

    def run(
        self,
        trial: Callable[[int, int], R],
        n_trials: int,
        seed: int,
        label: str = "trials",
    ) -> TrialBatchResult[R]:
        """
        Run `trial(index, derived_seed)` for every index in range(n_trials).

        Args:
            trial: Pure function of (trial index, derived seed)
            n_trials: Number of trials
            seed: Base seed of the experiment
            label: Name used in log messages

        Returns:
            TrialBatchResult with results ordered by trial index
        """
        seeds = [derive_seed(seed, index) for index in range(n_trials)]
        start = time.perf_counter()
        peak = self.memory_monitor.get_memory_usage() if self.config.enable_memory_monitoring else 0.0
        logger.info(f"Starting {label}: {n_trials} trials, base seed {seed}")

        results: List[Optional[R]] = [None] * n_trials
        completed = 0
        try:
            if self.config.max_workers <= 1 or n_trials <= 1:
                for index in range(n_trials):
                    results[index] = self._run_one(trial, index, seeds[index])
                    completed += 1
            else:
                with ThreadPoolExecutor(max_workers=self.config.max_workers) as executor:
                    futures = [
                        executor.submit(self._run_one, trial, index, seeds[index])
                        for index in range(n_trials)
                    ]
                    for index, future in enumerate(futures):
                        results[index] = future.result()
                        completed += 1
        except ApplicationException:
            raise
        except Exception as e:
            logger.error(f"{label} failed after {completed} trials: {str(e)}", exc_info=True)
            raise TrialProcessingException(
                message=f"Trial execution failed: {str(e)}",
                completed_count=completed,
                cause=e,
            )
        finally:
            self.memory_monitor.force_garbage_collection()

        if self.config.enable_memory_monitoring:
            peak = max(peak, self.memory_monitor.get_memory_usage())
        elapsed = time.perf_counter() - start
        logger.info(f"Finished {label} in {elapsed:.2f}s")
        return TrialBatchResult(results=list(results), seeds=seeds, elapsed_seconds=elapsed, memory_peak_mb=peak)

    @staticmethod
    def _run_one(trial: Callable[[int, int], R], index: int, trial_seed: int) -> R:
        try:
            return trial(index, trial_seed)
        except ApplicationException:
            raise
        except Exception as e:
            logger.error(f"Trial {index} failed: {str(e)}", exc_info=True)
            raise TrialProcessingException(
                message=f"Trial {index} failed: {str(e)}",
                trial_index=index,
                cause=e,
            )
