import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from model.dims import Dims  # noqa: E402
from model.params import ModelParams  # noqa: E402

FIXTURE_ANCHORS = ROOT / "src" / "data" / "fixtures" / "anchors_synthetic.csv"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-length training runs (minutes)")


@pytest.fixture(scope="session")
def anchors_path() -> Path:
    return FIXTURE_ANCHORS


@pytest.fixture
def small_dims() -> Dims:
    return Dims(N=6, n=4, m=16, T=20, hidden=16)


@pytest.fixture
def small_params(small_dims) -> ModelParams:
    return ModelParams.initialize(small_dims, 3, seed=7)


@pytest.fixture
def small_panel_y(small_dims) -> np.ndarray:
    """Normalized-looking observations of shape (3, T, N)."""
    gen = np.random.default_rng(11)
    t = np.linspace(0.0, 1.0, small_dims.T)[None, :, None]
    trend = np.linspace(-1.0, 1.0, small_dims.N)[None, None, :] * t
    return trend + 0.1 * gen.standard_normal((3, small_dims.T, small_dims.N))
