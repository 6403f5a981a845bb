import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria")
    config._acceptance_lines = []


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one line per acceptance criterion for the terminal summary."""
    lines = request.config._acceptance_lines

    def record(number: int, title: str, passed: bool, detail: str):
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
        lines.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
