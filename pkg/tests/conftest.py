"""Shared pytest hooks: collect acceptance criterion verdicts for the summary."""

from __future__ import annotations

CRITERIA_LINES: list[str] = []


def record_criterion(line: str) -> None:
    CRITERIA_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not CRITERIA_LINES:
        return
    terminalreporter.ensure_newline()
    terminalreporter.section("acceptance criteria")
    for line in CRITERIA_LINES:
        terminalreporter.write_line(line)
