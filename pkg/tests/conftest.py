import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def verdict(request, capsys):
    """Record and print one PASS/FAIL line per acceptance criterion."""

    def emit(number, title, ok, detail=""):
        line = f"criterion {number} ({title}): {'PASS' if ok else 'FAIL'}"
        if detail:
            line += f"  [{detail}]"
        request.config.acceptance_lines.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter, config):
    if config.acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in config.acceptance_lines:
            terminalreporter.write_line(line)
