import pytest

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion."""

    def _report(criterion: str, measured: float, tol: float, detail: str = ""):
        ok = bool(measured <= tol)
        _ACCEPTANCE_LINES.append(
            f"{'PASS' if ok else 'FAIL'}  {criterion:<44} measured={measured:.3e}  tol={tol:.0e}  {detail}"
        )
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
