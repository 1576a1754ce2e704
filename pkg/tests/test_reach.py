import numpy as np
import pytest

from distlab import ClosedSet, Segment, sample_field
from distlab.norms import Norm
from distlab.reach import (ReachError, estimate_reach, estimate_reach_at, project_to_superlevel,
                           superlevel_set)

from conftest import grid, two_points


def test_projections(one_point_field, two_point_field):
    p = project_to_superlevel(one_point_field, 1.0, [0.5, 0.0])
    assert p.unique and np.allclose(p.points[0], [1, 0], atol=0.02)
    assert not project_to_superlevel(one_point_field, 1.0, [0.0, 0.0]).unique
    q = project_to_superlevel(two_point_field, 0.5, [0.7, 0.0])
    assert q.unique and np.allclose(q.points[0], [0.5, 0.0], atol=0.02)
    inside = project_to_superlevel(one_point_field, 1.0, [2.0, 0.0])
    assert inside.distance == 0 and np.allclose(inside.points[0], [2, 0])


def test_reach_at_circle(one_point_field):
    est = estimate_reach_at(one_point_field, 1.0, [1.0, 0.0], samples=500, cap=2.0)
    assert est.epsilon == pytest.approx(1.0, rel=0.1)


def test_reach_at_two_circles(two_point_field):
    est = estimate_reach_at(two_point_field, 0.5, [1.5, 0.0], samples=1000)
    assert est.epsilon == pytest.approx(0.5, rel=0.1)


def test_convex_set_reaches_cap():
    far = ClosedSet([Segment((-100.0, -10.0), (100.0, -10.0))])
    f = sample_field(far, Norm.euclid(2), grid((-1, -1), (1, 1), 0.02))
    est = estimate_reach_at(f, 10.0, [0.0, 0.0], samples=500, cap=2.0)
    assert est.epsilon == 2.0


def test_more_samples_never_increase_epsilon(two_point_field):
    e = [estimate_reach_at(two_point_field, 0.5, [1.0, 0.5], samples=n, seed=3).epsilon for n in (50, 200, 800)]
    assert e[0] >= e[1] >= e[2]


def test_regular_radius_positive(two_point_field):
    rep = estimate_reach(two_point_field, 0.7, boundary_samples=4, samples=200)
    assert rep.global_reach >= two_point_field.h
    assert len(rep.to_dict()["per_point"]) == 4


def test_errors(one_point_field):
    with pytest.raises(ReachError):
        estimate_reach_at(one_point_field, 1.0, [0.0, 0.0])
    with pytest.raises(ReachError):
        superlevel_set(one_point_field, 100.0)
