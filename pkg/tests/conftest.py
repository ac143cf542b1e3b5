import pytest

_LINES = []


@pytest.fixture
def acceptance_line():
    """Record a criterion's pass/fail line for the end-of-run summary."""
    def record(line: str) -> None:
        print(line)
        _LINES.append(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
