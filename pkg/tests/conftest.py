"""Shared pytest scaffolding.

The acceptance module registers one summary line per criterion through
:func:`record_acceptance_line`; the terminal-summary hook reprints them at
the end of the run so the pass/fail status of every criterion is visible
even when pytest captures stdout.
"""

from __future__ import annotations

_ACCEPTANCE_LINES: list[str] = []


def record_acceptance_line(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in _ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
