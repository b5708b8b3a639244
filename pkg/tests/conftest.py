import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from approxmul import data_path
from approxmul.approxflow.graph import load_dataset, load_model
from approxmul.ppmatrix import dnn_preset, make_space

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def preset():
    return dnn_preset()


@pytest.fixture(scope="session")
def space4():
    return make_space(4, 4)


@pytest.fixture(scope="session")
def lenet():
    return load_model(data_path("lenet_digits.graph.json"))


@pytest.fixture(scope="session")
def digits():
    return load_dataset(data_path("digits_test.json"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        _CRITERIA[report.nodeid.split("::")[-1]] = report.outcome
    elif "test_acceptance.py" in report.nodeid and report.when == "setup" and report.outcome != "passed":
        _CRITERIA[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA, key=lambda s: int(s.split("_")[1][1:]) if s.split("_")[1][1:].isdigit() else 99):
        status = "PASS" if _CRITERIA[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}")
