import pytest

_LINES = []


@pytest.fixture
def report_line():
    """Record one pass/fail line; they are echoed again in the terminal summary."""
    def record(label, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'}  {label}: {detail}"
        print(line)
        _LINES.append(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
