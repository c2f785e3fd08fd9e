"""Shared fixtures, plus a summary section for the acceptance criteria.

Each acceptance test records one line before asserting, so the terminal
summary always shows a pass/fail verdict per criterion, including partial
failures.
"""

import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    def record(num: int, ok: bool, detail: str) -> None:
        verdict = "PASS" if ok else "FAIL"
        _ACCEPTANCE_LINES.append(f"criterion {num:2d}: {verdict} - {detail}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
