import pytest

from wncs import kernels
from wncs.channel import ChannelModel
from wncs.lti import SystemModel
from wncs.smdp import SmdpSpec

BACKENDS = ["python"] + (["compiled"] if kernels._ckernels is not None else [])


@pytest.fixture(scope="session")
def base_system():
    return SystemModel.scalar(1.2, d_max=512)


@pytest.fixture(scope="session")
def base_channel():
    return ChannelModel.exponential(0.8, 0.5)


@pytest.fixture(scope="session")
def spec70(base_system, base_channel):
    return SmdpSpec(base_system, base_channel, 70, 5)


@pytest.fixture(scope="session")
def spec200(base_system, base_channel):
    return SmdpSpec(base_system, base_channel, 200, 5)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
