import numpy as np
import pytest

from pmgpc.kernel import Hyperparams, gram
from pmgpc.model import Dataset

TOY_X = np.array([[-1.0, -1.0], [1.0, 1.0]])
TOY_THETA = Hyperparams.from_natural(15.0, [np.exp(-1.0)])

_REPORT = []


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run tests marked slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="slow: use --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _REPORT:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture
def report():
    """Record one acceptance line; returns ``ok`` so tests can assert on it."""

    def _record(name, ok, detail):
        _REPORT.append((name, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        return ok

    return _record


@pytest.fixture
def toy_data():
    """Two points at (-1,-1) and (1,1), both labelled +1."""
    return Dataset(TOY_X, np.ones(2))


@pytest.fixture
def toy_gram():
    return gram(TOY_X, TOY_THETA)


@pytest.fixture
def rng():
    return np.random.default_rng(20140417)
