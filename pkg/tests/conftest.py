import pytest

_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion and assert it."""

    def record(number: int, title: str, ok: bool, detail: str):
        line = f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
        _CRITERIA.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
