import sys
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "gradkit" / "data"

sys.path.insert(0, str(Path(__file__).resolve().parent))

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
