import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from acceptance_log import RESULTS  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        title, passed, detail = RESULTS[number]
        terminalreporter.write_line(
            f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}")
