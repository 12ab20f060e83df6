import sys

import numpy as np
import pytest

from epidermaquant import phantoms


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def stripe_phantom():
    return phantoms.tissue_phantom(shape=(400, 600), length=480, thickness=110, angle=0.0,
                                   dab_fraction=0.3, seed=7)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
