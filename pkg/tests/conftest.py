import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE = []


@pytest.fixture
def verdict(request):
    """Record and echo one PASS/FAIL line for an acceptance criterion."""

    def record(number, title, passed, detail, seconds=None):
        took = "" if seconds is None else f" [{seconds:.1f}s]"
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}  ({detail}){took}"
        ACCEPTANCE.append(line)
        capman = request.config.pluginmanager.getplugin("capturemanager")
        with capman.global_and_fixture_disabled():
            print("\n" + line, flush=True)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
