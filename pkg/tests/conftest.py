import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bjsearch.model import DiscreteCosts, MarketParams  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def baseline():
    return MarketParams(2, 1.0, 0.05, DiscreteCosts((0.0, 0.4), (0.5, 0.5)))


@pytest.fixture
def record_acceptance():
    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
