"""
Pytest configuration and shared fixtures for the toolkit tests.
"""

import os
import sys
from pathlib import Path

import numpy as np
import pytest

# Keep test runs from appending to the log file of the working directory
os.environ.setdefault("IPGD_LOG_TO_FILE", "false")
os.environ.setdefault("IPGD_TRIAL_MAX_WORKERS", "2")

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.domain.entities.measurement_model import EnsembleKind
from src.domain.entities.signal_instance import SignalInstance
from src.application.services.signal_service import make_measurements, make_tree_signal
from src.shared.trial_runner import TrialRunner, TrialRunnerConfig


@pytest.fixture
def rng():
    """Fresh seeded generator per test."""
    return np.random.default_rng(12345)


@pytest.fixture
def serial_runner():
    """Single-threaded trial runner without memory sampling."""
    return TrialRunner(TrialRunnerConfig(max_workers=1, enable_memory_monitoring=False))


@pytest.fixture
def tree_signal():
    """Tree-sparse signal on 31 nodes with 6 nonzeros."""
    return make_tree_signal(levels=5, k=6, top_levels=2, sigma_top=1.0, sigma_rest=0.2, seed=7)


@pytest.fixture
def sparse_signal():
    x = np.zeros(20)
    x[[2, 9, 15]] = [1.5, -2.0, 0.7]
    return SignalInstance.custom(x)


@pytest.fixture
def gaussian_model(sparse_signal):
    """40 Gaussian measurements of a 3-sparse vector in R^20."""
    return make_measurements(sparse_signal, EnsembleKind.IID_GAUSSIAN, seed=3, m=40)


@pytest.fixture
def small_gaussian_model():
    """6 x 8 Gaussian model for brute-force rate checks."""
    x = np.zeros(8)
    x[[1, 4]] = [1.0, -0.5]
    return make_measurements(SignalInstance.custom(x), EnsembleKind.IID_GAUSSIAN, seed=11, m=6)


class TestAssertions:
    """Helper class for common test assertions."""

    @staticmethod
    def assert_close(actual, expected, atol=1e-10, rtol=1e-10):
        """Assert arrays or scalars agree within tolerance."""
        np.testing.assert_allclose(actual, expected, atol=atol, rtol=rtol)

    @staticmethod
    def assert_monotone_nonincreasing(values, tolerance=1e-12):
        values = np.asarray(values, dtype=float)
        assert np.all(np.diff(values) <= tolerance), f"Sequence increases: {values}"

    @staticmethod
    def assert_json_structure(data, required_keys):
        """Assert that JSON data contains required keys."""
        for key in required_keys:
            assert key in data, f"Missing required key: {key}"

    @staticmethod
    def assert_unchanged(before: np.ndarray, after: np.ndarray):
        """Assert an input array was not modified in place."""
        np.testing.assert_array_equal(before, after)


@pytest.fixture
def test_assertions():
    """Provide test assertion helpers."""
    return TestAssertions
