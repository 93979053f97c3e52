import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))
warnings.filterwarnings("ignore", module="numba")

from tacshear.core import HydroParams, TactileGrid  # noqa: E402
from tacshear.geometry import Sphere, sample_surface  # noqa: E402

RADIUS = 0.0175
FIXTURES = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture(scope="session")
def sphere():
    return Sphere(RADIUS)


@pytest.fixture(scope="session")
def grid():
    return TactileGrid.centered()


@pytest.fixture(scope="session")
def surface(sphere):
    return sample_surface(sphere, 1024, seed=0)


@pytest.fixture(scope="session")
def small_surface(sphere):
    return sample_surface(sphere, 200, seed=1)


@pytest.fixture
def params():
    return HydroParams(3e4, 2e4, 2e6, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
