"""Shared pytest plumbing.

Acceptance tests register one line per criterion here; the terminal
summary prints them after the run so the pass/fail ledger survives
output capture.
"""

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
