import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

EXAMPLES_DIR = Path(__file__).resolve().parents[1] / "src" / "sfqm" / "examples"
DATA_DIR = Path(__file__).parent / "data"

_acceptance_results = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def example_files():
    return sorted(EXAMPLES_DIR.glob("*.sfqm"))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _acceptance_results.append((marker.args[0], item.name, rep.outcome))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    status = {}
    for number, _, outcome in _acceptance_results:
        status[number] = status.get(number, True) and outcome == "passed"
    for number in sorted(status):
        names = ", ".join(n for k, n, _ in _acceptance_results if k == number)
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if status[number] else 'FAIL'}  {names}")
