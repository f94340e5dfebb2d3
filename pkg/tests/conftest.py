import numpy as np
import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def accept():
    """Record one pass/fail line per acceptance criterion and assert it."""

    def record(number, ok, detail):
        line = _line(number, "PASS" if ok else "FAIL", detail)
        assert ok, line

    def skip(number, reason):
        _line(number, "SKIP", reason)
        pytest.skip(reason)

    record.skip = skip
    return record


def _line(number, status, detail):
    line = f"[criterion {number:>2}] {status}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
