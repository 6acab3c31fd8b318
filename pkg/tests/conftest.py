"""Shared fixtures; collects one verdict line per acceptance criterion."""
import pytest

_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record ``(criterion, ok, detail)``; the line is printed in the terminal summary."""
    def record(criterion: str, ok: bool, detail: str = ""):
        line = f"[{'PASS' if ok else 'FAIL'}] {criterion}" + (f": {detail}" if detail else "")
        _LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
