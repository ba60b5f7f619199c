import hypothesis
import numpy as np
import pytest

from darcy_smc.config import parse_config_data
from darcy_smc.driver import build_setup

hypothesis.settings.register_profile(
    "default", max_examples=50, deadline=None, derandomize=True
)
hypothesis.settings.load_profile("default")


@pytest.fixture(scope="session")
def p1_setup():
    """Small single-field inference problem shared across driver tests."""
    cfg = parse_config_data(
        {
            "model": "p1",
            "grid": {"nx": 10, "ny": 10},
            "observations": {"count": 9},
            "smc": {"particles": 40, "n_mu": 2},
        }
    )
    return build_setup(cfg)


@pytest.fixture(scope="session")
def p2_setup():
    cfg = parse_config_data(
        {
            "model": "p2",
            "grid": {"nx": 8, "ny": 8},
            "observations": {"count": 4},
            "smc": {"particles": 30, "n_mu": 2},
        }
    )
    return build_setup(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
