import sys

import numpy as np
import pytest

from taskbeam.quantization import AdcModel
from taskbeam.scenario import build_covariances, reference_scenario


@pytest.fixture(scope="session")
def scenario():
    return reference_scenario()


@pytest.fixture(scope="session")
def bundle(scenario):
    return build_covariances(scenario)


@pytest.fixture(scope="session")
def adc16():
    return AdcModel(16)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_combiner(rng, shape=(2, 8)):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
