import pytest

from moyal_lab.phase_core import SimConfig

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def cfg():
    return SimConfig(hbar=1.0)


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion; the lines are echoed in the summary."""
    def record(number: int, title: str, measured: str, passed: bool):
        line = f"ACCEPTANCE {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {measured}"
        print(line)
        _ACCEPTANCE_LINES.append((number, line))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
