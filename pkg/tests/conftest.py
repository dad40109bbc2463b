import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from maxlim import _accel  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    """Run the test once per kernel backend."""
    if request.param == "numba" and not _accel.HAVE_NUMBA:
        pytest.skip("numba not installed")
    monkeypatch.setattr(_accel, "USE_JIT", request.param == "numba")
    return request.param


@pytest.fixture
def acceptance_log():
    def log(line):
        ACCEPTANCE_LINES.append(line)
        print(line)

    return log


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
