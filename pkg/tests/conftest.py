import numpy as np
import pytest

from ofdmemu.config import PhyConfig
from ofdmemu.link import EmulationSetup

# one line per acceptance criterion, printed after the run summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def record_criterion():
    def record(number: int, name: str, passed: bool, detail: str) -> None:
        tag = "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.append(f"[{tag}] criterion {number} ({name}): {detail}")

    return record


@pytest.fixture(scope="session")
def default_cfg():
    return PhyConfig()


@pytest.fixture(scope="session")
def default_setup(default_cfg):
    return EmulationSetup.build(default_cfg)


@pytest.fixture
def rng():
    # function-scoped so consumption in one test cannot affect another
    return np.random.default_rng(12345)
