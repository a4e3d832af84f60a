"""Shared pytest wiring: surface the acceptance pass/fail lines.

Acceptance tests record one line per criterion; printing alone is not
enough because passing tests have their captured output discarded. The
terminal-summary hook replays the lines after the run, so they appear in
every pytest invocation that includes the acceptance module.
"""

ACCEPTANCE_LINES: list[str] = []


def record_criterion(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line)  # also visible inline when capture is off or the test fails


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
