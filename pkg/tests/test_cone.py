import math

import numpy as np
import pytest

from distlab.cone import (THRESHOLD, ConeDirection, ConeError, ConeMesh, cone_angle, cone_intrinsic_distance,
                          cone_path_length, mesh_geodesic_distance, obtuse_triple_search, paper_inequality_check,
                          random_admissible_pairs)

A = THRESHOLD


def d(r, t, s, a=A):
    return ConeDirection(r, t, s, a)


def random_dirs(n, alpha, seed):
    rng = np.random.default_rng(seed)
    return [d(rng.uniform(0, 2), rng.uniform(0, 2 * np.pi), rng.normal(), alpha) for _ in range(n)]


def test_path_length():
    assert cone_path_length(d(1, 0, 0), d(1, math.pi, 0)) == pytest.approx(math.pi)
    assert cone_path_length(d(1, 2, 3), d(1, 2, 3)) == 0
    assert cone_path_length(d(0, 0, 0), d(0, 0, 2)) == pytest.approx(2)
    with pytest.raises(ConeError):
        cone_path_length(d(1, 0, 0), d(2, 0, 0))
    with pytest.raises(ConeError):
        cone_path_length(d(1, 0, 0), d(1, 0, 0, 1.0))


def test_intrinsic_distance():
    q = math.sqrt(1 + A * A)
    assert cone_intrinsic_distance(d(0, 0, 0), d(1, 0, 0)) == pytest.approx(q)
    assert cone_intrinsic_distance(d(1, 0.3, 0), d(2, 0.3, 0)) == pytest.approx(q)
    ell, k = math.sqrt(2 * math.pi**2), 1 / math.sqrt(2 * math.pi**2)
    assert cone_intrinsic_distance(d(1, 0, 0), d(1, math.pi, 0)) == pytest.approx(
        math.sqrt(2 * ell**2 * (1 - math.cos(k * math.pi))))


def test_angle():
    assert cone_angle(d(1, 1, 1), d(1, 1, 1)).value == pytest.approx(0, abs=1e-7)
    assert cone_angle(d(0, 0, 1), d(0, 0, -1)).value == pytest.approx(math.pi)
    a = cone_angle(d(1, 0, 0), d(1, math.pi, 0))
    assert a.value <= math.pi / 2 and a.clamp <= 1e-9
    with pytest.raises(ConeError):
        cone_angle(d(0, 0, 0), d(1, 0, 0))


def test_angle_scale_invariant():
    for x, y in zip(random_dirs(50, A, 1), random_dirs(50, A, 2)):
        base = cone_angle(x, y).value
        assert cone_angle(x.scaled(3.7), y).value == pytest.approx(base, abs=1e-9)
        assert cone_angle(x, y.scaled(0.2)).value == pytest.approx(base, abs=1e-9)


def test_metric_axioms():
    for alpha in (0.3, A):
        P = random_dirs(60, alpha, 3)
        for x, y, z in zip(P[0::3], P[1::3], P[2::3]):
            assert cone_intrinsic_distance(x, y) == cone_intrinsic_distance(y, x)
            assert cone_intrinsic_distance(x, z) <= cone_intrinsic_distance(x, y) + cone_intrinsic_distance(y, z) + 1e-9


def test_inequality_chain():
    v = paper_inequality_check(d(1, 0, 0), d(1, math.pi, 0))
    assert v.passed and v.dist2 <= v.path2 <= v.bound <= v.norms2 + 1e-12
    assert paper_inequality_check(d(1, 1, 1), d(1, 1, 1)).passed
    pairs = random_admissible_pairs(A, 2000, seed=4)
    assert all(paper_inequality_check(a, b).passed for a, b in pairs)
    assert all(cone_intrinsic_distance(a, b) <= cone_path_length(a, b) + 1e-9 for a, b in pairs)
    with pytest.raises(ConeError):
        paper_inequality_check(d(1, 0, 1), d(1, 0, -1))
    with pytest.raises(ConeError):
        paper_inequality_check(d(1, 0, 0, 1.0), d(1, 1, 0, 1.0))


def test_no_obtuse_triples_above_threshold():
    for alpha in np.linspace(A, 3 * A, 20):
        res = obtuse_triple_search(float(alpha), 100_000, seed=7)
        assert res.witness is None
        assert res.max_min_angle <= math.pi / 2 + 1e-6


def test_obtuse_triple_for_sharp_cone():
    res = obtuse_triple_search(0.1, 100_000, seed=7)
    assert res.witness is not None
    w = res.witness
    for i, j in ((0, 1), (0, 2), (1, 2)):
        assert cone_angle(w[i], w[j]).value > math.pi / 2 + 1e-6
    assert res.to_dict()["witness"] is not None


def test_mesh_oracle_small():
    mesh = ConeMesh(A, 1.05 * 2 * math.sqrt(1 + A * A))
    assert mesh.triangles >= 10**5 - 1000
    x, y = d(1, 0, 0), d(1, math.pi, 0)
    assert mesh_geodesic_distance(x, y, mesh) == pytest.approx(cone_intrinsic_distance(x, y), rel=5e-3)
    for x, y in zip(random_dirs(5, A, 8), random_dirs(5, A, 9)):
        assert mesh_geodesic_distance(x, y, mesh) == pytest.approx(cone_intrinsic_distance(x, y), rel=5e-3)
