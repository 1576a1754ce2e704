import numpy as np
import pytest

from distlab import ClosedSet, GridSpec, Point, sample_field
from distlab.norms import Norm


def two_points():
    return ClosedSet([Point((-1.0, 0.0)), Point((1.0, 0.0))])


def one_point():
    return ClosedSet([Point((0.0, 0.0))])


def grid(lo, hi, h):
    lo = np.asarray(lo, float)
    n = int(round((np.asarray(hi, float) - lo).max() / h)) + 1
    return GridSpec.from_bbox(lo, hi, n)


@pytest.fixture(scope="session")
def two_point_field():
    return sample_field(two_points(), Norm.euclid(2), grid((-2, -2), (2, 2), 0.02))


@pytest.fixture(scope="session")
def one_point_field():
    return sample_field(one_point(), Norm.euclid(2), grid((-3, -3), (3, 3), 0.02))


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
