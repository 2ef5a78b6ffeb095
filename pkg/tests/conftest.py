import warnings

import numpy as np
import pytest

from rhale.effects import LocalEffects

ACCEPTANCE_LINES: list[str] = []


def make_effects(xs, fx, s=0):
    return LocalEffects(s, np.asarray(xs, dtype=float), np.asarray(fx, dtype=float))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
