import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distlab.norms import Norm, NormError, norm_eval, norm_gradient, parse_norm, sample_unit_sphere

NORMS = [Norm.euclid(2), Norm.euclid(3), Norm.lp(4, 2), Norm.lp(4, 3), Norm.lp(3, 2)]
vec2 = st.tuples(*[st.floats(-10, 10, allow_nan=False)] * 2).map(np.array)


def test_eval_examples():
    assert norm_eval(Norm.euclid(2), [3, 4]) == pytest.approx(5)
    assert norm_eval(Norm.lp(4), [1, 0]) == pytest.approx(1)
    assert norm_eval(Norm.lp(4), [1, 1]) == pytest.approx(2 ** 0.25, rel=1e-12)


def test_gradient_examples():
    assert np.allclose(norm_gradient(Norm.euclid(2), [3, 4]), [0.6, 0.8])
    assert np.allclose(norm_gradient(Norm.euclid(2), [0, 1]), [0, 1])
    g = norm_gradient(Norm.lp(4), [1, 1])
    assert np.allclose(g, 2 ** -0.75)


def test_gradient_matches_finite_differences():
    n = Norm.lp(4)
    v = np.array([1.0, 1.0])
    fd = [(norm_eval(n, v + 1e-6 * e) - norm_eval(n, v - 1e-6 * e)) / 2e-6 for e in np.eye(2)]
    assert np.allclose(norm_gradient(n, v), fd, atol=1e-8)


def test_parse_and_errors():
    assert parse_norm("euclid").is_euclidean
    assert parse_norm("lp:4", 3).dim == 3
    assert parse_norm("lp:4").spec() == "lp:4"
    with pytest.raises(NormError):
        parse_norm("l1")
    with pytest.raises(NormError):
        Norm.euclid(4)
    with pytest.warns(UserWarning):
        Norm.lp(1.5)


def test_unit_sphere_samples():
    U = sample_unit_sphere(Norm.euclid(2), 4, seed=0)
    ang = np.sort(np.arctan2(U[:, 1], U[:, 0]))
    gaps = np.diff(np.r_[ang, ang[0] + 2 * np.pi])
    assert np.allclose(gaps, np.pi / 2)
    V = sample_unit_sphere(Norm.lp(4), 8, seed=0)
    assert np.allclose(norm_eval(Norm.lp(4), V), 1, atol=1e-12)
    W = sample_unit_sphere(Norm.euclid(3), 100, seed=1)
    cos = np.clip(W @ W.T, -1, 1)
    np.fill_diagonal(cos, -1)
    assert np.arccos(cos.max(axis=1)).max() <= 0.5


@pytest.mark.parametrize("norm", NORMS, ids=lambda n: f"{n.spec()}-{n.dim}")
def test_euler_identity_and_homogeneity(norm):
    rng = np.random.default_rng(3)
    V = rng.normal(size=(200, norm.dim))
    N = norm_eval(norm, V)
    G = norm_gradient(norm, V)
    assert np.all(np.abs(np.sum(G * V, axis=1) - N) <= 1e-10 * N)
    assert np.allclose(norm_gradient(norm, 2 * V), G, atol=1e-10)
    assert np.allclose(norm_eval(norm, 3.5 * V), 3.5 * N, rtol=1e-12)


@given(vec2, vec2)
@settings(max_examples=200, deadline=None)
def test_triangle_inequality(a, b):
    for n in (Norm.euclid(2), Norm.lp(4, 2)):
        assert norm_eval(n, a + b) <= (norm_eval(n, a) + norm_eval(n, b)) * (1 + 1e-12) + 1e-300


def test_gradient_lipschitz_on_sphere_lp4():
    n = Norm.lp(4, 2)
    rng = np.random.default_rng(0)

    def ratio(seed):
        U = sample_unit_sphere(n, 400, seed=seed)
        G = norm_gradient(n, U)
        i, j = np.triu_indices(len(U), 1)
        du = np.linalg.norm(U[i] - U[j], axis=1)
        ok = du > 1e-6
        return (np.linalg.norm(G[i] - G[j], axis=1)[ok] / du[ok]).max()

    L = ratio(1)
    assert math.isfinite(L)
    assert ratio(2) <= 1.5 * L
