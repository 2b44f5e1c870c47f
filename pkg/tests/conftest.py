import numpy as np
import pytest

_ACCEPTANCE = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240617)


@pytest.fixture
def criterion(request):
    """Record one acceptance-criterion line for the terminal summary."""

    def record(number, passed, detail):
        _ACCEPTANCE.append((number, bool(passed), detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}")
