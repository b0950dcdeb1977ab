import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from npbo.semigroup import SymbolParams
from npbo.spectral import TorusGrid

settings.register_profile("npbo", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("npbo")


@pytest.fixture
def grid():
    return TorusGrid(32.0, 512)


@pytest.fixture
def params():
    return SymbolParams(1.0)


def gaussian(x, amplitude=1.0, width=1.0, center=0.0):
    return amplitude * np.exp(-((x - center) / width) ** 2)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
