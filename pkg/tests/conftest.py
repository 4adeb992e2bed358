import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

# (criterion number, description, passed, detail), filled by test_acceptance
ACCEPTANCE = []


@pytest.fixture
def record_acceptance():
    def record(number, description, passed, detail=""):
        ACCEPTANCE.append((number, description, bool(passed), detail))
        return passed

    return record


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, description, passed, detail in sorted(ACCEPTANCE, key=lambda a: a[0]):
        status = "PASS" if passed else "FAIL"
        line = f"{status}  criterion {number:>2}: {description}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
