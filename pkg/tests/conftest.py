import pytest

_RESULTS = {}


@pytest.fixture
def report_criterion():
    """Record one acceptance line: ``report_criterion(n, ok, detail)``."""
    def record(number, ok, detail):
        _RESULTS[number] = (bool(ok), detail)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        ok, detail = _RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
