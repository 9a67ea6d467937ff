import os
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

# Add the parent directory to Python path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.models.protocol import PolarizationVector, SessionConfig

SQRT_HALF = float(np.sqrt(0.5))


def vector(alpha: float, beta: float, magnitude: float = 1.0) -> PolarizationVector:
    return PolarizationVector(alpha=alpha, beta=beta, magnitude=magnitude)


H_VEC = vector(1.0, 0.0)
V_VEC = vector(0.0, 1.0)
PLUS_VEC = vector(SQRT_HALF, SQRT_HALF)
TARGET_68 = vector(0.6, 0.8)


def make_session(**overrides) -> SessionConfig:
    fields = dict(u=H_VEC, v_a=H_VEC, v_b=V_VEC, shots=200, seed=11)
    fields.update(overrides)
    return SessionConfig(**fields)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run full-scale statistical tests")
    parser.addoption(
        "--update-golden", action="store_true", default=False, help="rewrite tests/golden from the current code"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def update_golden(request) -> bool:
    return request.config.getoption("--update-golden")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def minimal_config_data():
    return {
        "session": {"shots": 40, "seed": 3},
        "vectors": {
            "u": {"alpha": 1.0, "beta": 0.0},
            "v_a": {"alpha": 1.0, "beta": 0.0},
            "v_b": {"alpha": 0.0, "beta": 1.0},
        },
    }


@pytest.fixture
def write_config(tmp_path):
    """Dump a config mapping to YAML and return its path."""

    def _write(data, name: str = "experiment.yaml") -> Path:
        path = tmp_path / name
        path.write_text(yaml.safe_dump(data, sort_keys=False), encoding="utf-8")
        return path

    return _write
