import os

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SCENARIOS = os.path.join(ROOT, "scenarios")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def scenario_path(name):
    return os.path.join(SCENARIOS, name if name.endswith(".toml") else name + ".toml")


# one line per acceptance criterion, echoed in the terminal summary so the
# PASS/FAIL verdicts land in the captured pytest log
ACCEPTANCE_LINES = []


def report(number, name, ok, detail):
    line = f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'} {name}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
