import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

# (criterion, passed, detail) lines filled in by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
