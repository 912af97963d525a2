import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

VERDICTS = []


def record_verdict(number: int, ok: bool, detail: str) -> None:
    VERDICTS.append((number, ok, detail))


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(VERDICTS):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
