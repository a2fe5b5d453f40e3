"""Shared pytest hooks.

The acceptance module records one (status, label) entry per criterion; the
terminal-summary hook below prints them after the run, outside pytest's
output capture, so each criterion always shows a single pass/fail line.
"""

acceptance_results: list[tuple[str, str]] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for status, label in acceptance_results:
        terminalreporter.write_line(f"{status}  {label}")
