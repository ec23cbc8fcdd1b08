import numpy as np
import pytest

from icpm.models import cart_pendulum, tiptoebot
from icpm.verify import _design


@pytest.fixture(scope="session")
def cart():
    return cart_pendulum()


@pytest.fixture(scope="session")
def tip():
    return tiptoebot()


@pytest.fixture(scope="session")
def cart_design():
    return _design("cart-pendulum")


@pytest.fixture(scope="session")
def tip_design():
    return _design("tiptoebot")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
