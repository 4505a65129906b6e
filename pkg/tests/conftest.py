import pytest

_RESULTS = {}


@pytest.fixture
def report():
    """Record one acceptance line: ``report(criterion, passed, detail)``."""
    def record(criterion, passed, detail):
        _RESULTS[criterion] = (bool(passed), detail)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_RESULTS):
        passed, detail = _RESULTS[criterion]
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}")
