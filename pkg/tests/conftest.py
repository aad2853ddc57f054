import numpy as np
import pytest

from g4c.model import DynamicGaussians, GaussianScene, StaticGaussians
from g4c.synth import standard_scene

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def one_dynamic(positions, rotations=None, interval=1, centers=(0.0, 1e9), variances=(1.0, 1.0),
                duration=None):
    """Scene holding a single dynamic Gaussian with the given keyframes."""
    positions = np.asarray(positions, dtype=float)
    tk = len(positions)
    if rotations is None:
        rotations = np.tile(IDENTITY, (tk, 1))
    duration = float((tk - 1) * interval) if duration is None else duration
    d = DynamicGaussians(positions[None], np.asarray(rotations, float)[None], np.zeros((1, 3)),
                         np.ones(1), np.array([centers], float), np.array([variances], float),
                         np.zeros((1, 1, 3)))
    return GaussianScene(StaticGaussians.empty(0), d, duration, interval,
                         tuple(np.arange(int(duration) + 1, dtype=float)), 0)


@pytest.fixture(scope="session")
def standard():
    """The standard synthetic scene and its probe set (shared, pruning cache included)."""
    return standard_scene()


#: one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
