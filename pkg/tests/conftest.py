import pytest
from hypothesis import settings
from mpmath import mp

from fdsl.core import DEFAULT_PRECISION

import problems

settings.register_profile("fdsl", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("fdsl")


@pytest.fixture(autouse=True)
def _reset_precision():
    mp.dps = DEFAULT_PRECISION
    yield
    mp.dps = DEFAULT_PRECISION


def pytest_terminal_summary(terminalreporter):
    if problems.ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in problems.ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
