import pytest

_LINES = {}


@pytest.fixture
def criterion():
    """Record the verdict line of one acceptance criterion."""

    def report(number, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {detail}"
        _LINES[number] = line
        print(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_LINES):
        terminalreporter.write_line(_LINES[number])
