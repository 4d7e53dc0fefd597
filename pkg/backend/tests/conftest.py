"""
Test configuration and fixtures for vtlab tests
"""
import os
import sys
from pathlib import Path

import numpy as np
import pytest

BACKEND_DIR = Path(__file__).resolve().parents[1]
if str(BACKEND_DIR) not in sys.path:
    sys.path.insert(0, str(BACKEND_DIR))

# Quiet training logs during tests
os.environ.setdefault("VTLAB_LOG_LEVEL", "WARNING")

from vtlab.config import RunConfig, build_config  # noqa: E402
from vtlab.market.dataset import Dataset  # noqa: E402
from vtlab.oracle.market import generate_log, logging_policy  # noqa: E402
from vtlab.oracle.params import OracleParams, default_params  # noqa: E402

def pytest_configure(config):
    config.addinivalue_line("markers", "slow: end-to-end runs of the training pipeline")


TINY_CONFIG = {
    "sessions": 300,
    "gansd.iterations": 5,
    "gansd.hidden": [8],
    "gansd.batch_size": 32,
    "mail.iterations": 2,
    "mail.trajectories": 16,
    "mail.hidden": [8],
    "mail.disc_hidden": [8],
    "mail.step_cap": 30,
    "mail.expert_batch": 128,
    "trpo.batch_size": 128,
    "trpo.iterations": 2,
    "trpo.hidden": [8],
    "trpo.value_epochs": 1,
    "sl.epochs": 3,
    "sl.hidden": [8],
    "bc.epochs": 2,
    "bc.hidden": [8],
    "bench.seeds": 2,
    "bench.distribution_samples": 2000,
    "bench.eval_sessions": 200,
    "bench.slot_sessions": 200,
    "bench.slot_gansd_iterations": 2,
    "bench.slot_mail_iterations": 1,
}


@pytest.fixture
def tiny_flat():
    """Flat dotted overrides for a configuration that trains in seconds"""
    return dict(TINY_CONFIG)


@pytest.fixture
def tiny_cfg() -> RunConfig:
    """Small run configuration: tiny networks, few iterations, few sessions"""
    return build_config(TINY_CONFIG)


@pytest.fixture(scope="session")
def oracle_params() -> OracleParams:
    """Ground-truth market with the default calibration"""
    return default_params()


@pytest.fixture(scope="session")
def small_log(oracle_params) -> Dataset:
    """300 sessions of the uniform logging policy in the ground-truth market"""
    return generate_log(oracle_params, logging_policy(oracle_params), sessions=300, seed=7)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def run_root(tmp_path, monkeypatch) -> Path:
    """Output root for command-line runs"""
    root = tmp_path / "runs"
    monkeypatch.setenv("VTLAB_OUT", str(root))
    return root
