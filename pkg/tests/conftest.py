import numpy as np
import pytest

from cwtune.analytic import stations_from_frames
from cwtune.timing import FrameSpec


@pytest.fixture
def mcs3_1000():
    return FrameSpec.from_bytes(1000, 26)


@pytest.fixture
def hetero_rate_stations():
    frames = [FrameSpec.from_bytes(1500, r) for r in (6.5, 26, 65)]
    return stations_from_frames(frames)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    for name, mod in list(sys.modules.items()):
        if name.endswith("test_acceptance") and getattr(mod, "REPORT", None):
            terminalreporter.section("acceptance criteria")
            for line in mod.REPORT:
                terminalreporter.write_line(line)
