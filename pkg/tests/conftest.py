import numpy as np
import pytest

from nbilliard.potential import CentreSystem, Wall


@pytest.fixture
def pair():
    return CentreSystem.symmetric_pair()


@pytest.fixture
def triple():
    return CentreSystem([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.5]], [1.0, 0.7, 0.4], [1.0, 1.0, 1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


def bundled_systems():
    """(name, system, wall) triples shared by several sign and sampling checks."""
    return [
        ("pair", CentreSystem.symmetric_pair(), Wall((1.0, 0.0), 3.0)),
        ("unequal", CentreSystem([[1.0, 0.0], [-1.0, 0.0]], [1.5, 0.5], [1.0, 1.0]),
         Wall.from_angle(0.3, 2.5)),
        ("triple", CentreSystem([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.5]], [1.0, 0.7, 0.4],
                                [1.0, 1.0, 1.0]), Wall((1.0, 0.0), 3.0)),
        ("mixed", CentreSystem([[0.8, 0.2], [-0.7, -0.1]], [1.0, 0.5], [1.5, 1.0]),
         Wall.from_angle(-0.2, 2.0)),
        ("boltzmann", CentreSystem([[0.0, 0.0], [0.0, 0.0]], [1.0, 0.1], [1.0, 2.0]),
         Wall((1.0, 0.0), 1.5)),
    ]


def sample_points(rng, sys, n, lo=0.05, hi=6.0):
    """Uniform points in a box, at least ``lo`` away from every centre."""
    pts = rng.uniform(-hi, hi, size=(4 * n, 2))
    d = np.min(np.hypot(pts[:, None, 0] - sys.centres[None, :, 0],
                        pts[:, None, 1] - sys.centres[None, :, 1]), axis=1)
    return pts[d > lo][:n]
