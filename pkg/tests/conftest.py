from pathlib import Path

import numpy as np
import pytest

from polydiff.config import load_config
from polydiff.grid import GridSpec, build_operators
from polydiff.model import ModelParams, build_lift, homogeneous_lift, make_preset

ROOT = Path(__file__).resolve().parents[1]
DEFAULT_CONFIG = ROOT / "configs" / "default.yaml"

ACCEPTANCE_LINES = {}


def record(number: int, title: str, passed: bool, detail: str):
    """Store and print one acceptance verdict line."""
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {title}: {detail}"
    ACCEPTANCE_LINES[(number, title)] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def default_cfg():
    return load_config(DEFAULT_CONFIG)


@pytest.fixture(scope="session")
def grid1d():
    return GridSpec.interval(1.0, 128)


@pytest.fixture(scope="session")
def ops1d(grid1d):
    return build_operators(grid1d)


@pytest.fixture(scope="session")
def grid2d():
    return GridSpec.rectangle((1.0, 1.0), (32, 32))


@pytest.fixture(scope="session")
def ops2d(grid2d):
    return build_operators(grid2d)


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def lift1d(grid1d, params):
    return build_lift(grid1d, make_preset("gaussian"), params)


@pytest.fixture(scope="session")
def hom1d(grid1d, params):
    return homogeneous_lift(grid1d, params)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
