"""Shared test plumbing: the acceptance criteria report.

Acceptance tests record one line each through the criterion_report fixture;
the lines are replayed in a dedicated terminal section after the run so the
pass/fail status of every criterion is visible even when all tests pass.
"""

_CRITERION_LINES: list[str] = []


import pytest


@pytest.fixture
def criterion_report():
    def record(number: int, title: str, passed: bool, detail: str) -> None:
        verdict = "PASS" if passed else "FAIL"
        line = f"criterion {number:02d} {title}: {verdict} ({detail})"
        _CRITERION_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_CRITERION_LINES):
        terminalreporter.write_line(line)
