import numpy as np
import pytest

from chiralgiant import defaults
from chiralgiant.device import build_device
from chiralgiant.pcw_band import PcwParams, build_band_structure


@pytest.fixture(scope="session")
def params():
    return PcwParams()


@pytest.fixture(scope="session")
def device():
    """Calibrated N = 4096 device shared by the slow tests."""
    return build_device(PcwParams(), 4096)


@pytest.fixture(scope="session")
def small_bs(params):
    return build_band_structure(params, 64)


@pytest.fixture(scope="session")
def mid_bs(params):
    return build_band_structure(params, 512)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def ghz(f):
    return defaults.ghz(f)


@pytest.fixture(scope="session")
def dev1024():
    """Shorter ring for fast emission runs at larger rates."""
    return build_device(PcwParams(), 1024)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Record (and print) one PASS/FAIL line per acceptance criterion."""
    def report(number, ok, detail):
        line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def pytest_addoption(parser):
    parser.addoption("--longrun", action="store_true", help="run the N = 10^4 full-scale suite")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--longrun"):
        return
    skip = pytest.mark.skip(reason="full-scale suite; pass --longrun")
    for item in items:
        if "longrun" in item.keywords:
            item.add_marker(skip)
