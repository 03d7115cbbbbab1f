import math
import sys

import pytest
from hypothesis import settings

from qgmaryland import GraphModel, MarylandParams, spectral_gaps
from qgmaryland.spectral_solver import resolved_bracket

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SILVER = math.sqrt(2.0) - 1.0


@pytest.fixture(scope="session")
def free1():
    return GraphModel.free([1.0])


@pytest.fixture(scope="session")
def golden():
    return MarylandParams(1.0, (GOLDEN,), 0.0)


@pytest.fixture(scope="session")
def first_gap(free1):
    """The gap below the first Dirichlet point, started just above zero."""
    return spectral_gaps(free1, (1e-9, math.pi**2))[0]


@pytest.fixture(scope="session")
def first_bracket(free1, golden, first_gap):
    return resolved_bracket(free1, golden, first_gap)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[key])
