import numpy as np
import pytest

from loctime import systems
from loctime.kernel_quadrature import fejer_kernel

ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def kernel():
    return fejer_kernel()


@pytest.fixture(scope="session", params=sorted(systems.SHIPPED))
def shipped(request):
    sys, obs = systems.SHIPPED[request.param]()
    return request.param, sys, obs


@pytest.fixture(scope="session")
def two_state():
    return systems.two_state()


@pytest.fixture(scope="session")
def golden():
    return systems.golden_mean()


@pytest.fixture(scope="session")
def iid3():
    return systems.iid3()


@pytest.fixture(scope="session")
def trivial():
    return systems.trivial()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = {}


@pytest.fixture
def acceptance_log(request):
    return request.config.stash[ACCEPTANCE_KEY]


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines):
        terminalreporter.write_line(lines[key])
