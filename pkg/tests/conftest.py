import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from recoilslit.constants import DEFAULT_CONSTANTS  # noqa: E402
from recoilslit.physics import MotionalState, TrapModel  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def constants():
    return DEFAULT_CONSTANTS


@pytest.fixture(scope="session")
def deep_trap():
    return TrapModel.from_momentum_anchor(10.49)


@pytest.fixture(scope="session")
def ground(deep_trap):
    return MotionalState.in_trap(deep_trap)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
