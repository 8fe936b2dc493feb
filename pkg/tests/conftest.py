"""Shared pytest plumbing: surface the acceptance-criterion verdict lines.

Passing tests have their stdout captured, so the one-line-per-criterion
reports are collected here and re-emitted in the terminal summary where they
are always visible.
"""

criterion_lines = []


def record_criterion(line):
    criterion_lines.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in criterion_lines:
            terminalreporter.write_line(line)
