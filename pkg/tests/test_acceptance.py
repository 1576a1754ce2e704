"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are collected in RESULTS and echoed by the terminal summary hook
in conftest.py. Tolerances are the stated ones; failing criteria are left
failing.
"""

import math
import time

import numpy as np
import pytest
from scipy.spatial import cKDTree

from conftest import grid, one_point, two_points
from distlab import ClosedSet, Point, sample_field
from distlab.cli import main as cli_main
from distlab.cone import (THRESHOLD, ConeMesh, cone_intrinsic_distance, mesh_geodesic_distance,
                          obtuse_triple_search, paper_inequality_check, random_admissible_pairs)
from distlab.critical import critical_scan
from distlab.dc import DCFunction, abs_1d, morse_sard_check
from distlab.levelset import (extract_level_set, lipschitz_graph_check, manifold_check, polylines,
                              radius_sweep, semiconcavity_check)
from distlab.norms import Norm
from distlab.reach import estimate_reach

RESULTS = []


def record(n, passed, detail):
    line = f"CRITERION {n}: {'PASS' if passed else 'FAIL'} - {detail}"
    RESULTS.append(line)
    print(line)
    return passed


def unit_circle_polyline(p, count=200001):
    th = np.linspace(0, 2 * np.pi, count)
    P = np.c_[np.cos(th), np.sin(th)]
    return P / (np.abs(P) ** p).sum(1, keepdims=True) ** (1 / p)


# --- 1: two points, Euclidean ------------------------------------------------

def two_point_pattern(norm, criterion):
    h = 0.005
    t0 = time.perf_counter()
    f = sample_field(two_points(), norm, grid((-2, -2), (2, 2), h))
    rep = critical_scan(f, criterion=criterion)
    sweep = radius_sweep(f, 0.25, 1.75, 200, rep.critical_values)
    elapsed = time.perf_counter() - t0
    P, V = rep.critical_points, rep.critical_values
    fails = sweep.failing()
    return h, elapsed, P, V, fails, rep


def test_criterion_1_two_points():
    h, elapsed, P, V, fails, _ = two_point_pattern(Norm.euclid(2), "hull")
    near_origin = len(P) > 0 and float(np.linalg.norm(P, axis=1).max()) <= 3 * h
    values_ok = len(V) > 0 and V.min() >= 1 - 2 * h and V.max() <= 1 + 2 * h
    sweep_ok = len(fails) > 0 and bool(np.all(np.abs(fails - 1) <= 5 * h))
    ok = near_origin and values_ok and sweep_ok and elapsed <= 60
    record(1, ok, f"{len(P)} critical vertices, max |x| {np.linalg.norm(P, axis=1).max():.4g}; "
                  f"values [{V.min():.6g}, {V.max():.6g}]; NonManifold at {np.round(fails, 5).tolist()}; "
                  f"{elapsed:.1f} s")
    assert ok


# --- 2: circle ---------------------------------------------------------------

def test_criterion_2_circle():
    h = 0.01
    f = sample_field(one_point(), Norm.euclid(2), grid((-1.5, -1.5), (1.5, 1.5), h))
    mesh = extract_level_set(f, 1.0)
    chains = polylines(mesh)
    length = mesh.length()
    verdict = manifold_check(mesh)
    gs = lipschitz_graph_check(f, mesh, window=0.2, samples=50)
    L = max(g.lipschitz for g in gs)
    ok = (len(chains) == 1 and chains[0][1] and abs(length - 2 * np.pi) <= 0.01 * 2 * np.pi
          and verdict.status == "Manifold" and len(gs) == 50 and all(g.passed for g in gs) and L <= 0.3)
    record(2, ok, f"{len(chains)} polyline(s), length {length:.6f} vs 2pi {2 * np.pi:.6f}; "
                  f"{verdict.status}; graph check {sum(g.passed for g in gs)}/50, L={L:.3f}")
    assert ok


# --- 3: hull vs directional on random clouds ---------------------------------

def test_criterion_3_criteria_agree():
    h = 0.01
    rates = []
    for seed in range(10):
        f = sample_field(cloud(seed), Norm.euclid(2), grid((-0.25, -0.25), (1.25, 1.25), h))
        hull = critical_scan(f, criterion="hull")
        dirn = critical_scan(f, criterion="directional")
        assert np.array_equal(hull.scanned, dirn.scanned)
        X = f.grid.vertices(hull.scanned)
        crit = X[~hull.regular]
        if len(crit):
            far = cKDTree(crit).query(X)[0] > 3 * h
        else:
            far = np.ones(len(X), bool)
        rates.append(float(np.mean(hull.regular[far] == dirn.regular[far])))
    ok = min(rates) >= 0.99
    record(3, ok, f"agreement per cloud min {min(rates):.4%}, mean {np.mean(rates):.4%}")
    assert ok


# --- 4: premeasure decreases with h (random clouds) -----------------------------

def cloud(seed):
    pts = np.random.default_rng(seed).uniform(0, 1, (20, 2))
    return ClosedSet([Point(tuple(p)) for p in pts])


def test_criterion_4_premeasure_decreases():
    rows = []
    for seed in range(10):
        pre = []
        for h in (0.02, 0.01, 0.005):
            f = sample_field(cloud(seed), Norm.euclid(2), grid((-0.25, -0.25), (1.25, 1.25), h))
            est = critical_scan(f, criterion="hull").hausdorff
            assert est.s == 0.5 and est.delta == pytest.approx(4 * h)
            pre.append(est.premeasure)
        rows.append(pre)
    ok_each = [a > b > c for a, b, c in rows]
    ok = all(ok_each)
    record(4, ok, f"strictly decreasing in {sum(ok_each)}/10 clouds; premeasures "
                  + "; ".join(f"{[round(p, 3) for p in r]}" for r in rows))
    assert ok


# --- 5: reach -----------------------------------------------------------------

def test_criterion_5_reach():
    h = 0.01
    f1 = sample_field(one_point(), Norm.euclid(2), grid((-2.5, -2.5), (2.5, 2.5), h))
    e1 = estimate_reach(f1, 1.0, samples=1000).global_reach
    f2 = sample_field(two_points(), Norm.euclid(2), grid((-2.5, -2.5), (2.5, 2.5), h))
    e2 = estimate_reach(f2, 0.5, samples=1000).global_reach
    e3 = estimate_reach(f2, 1.0, samples=1000).global_reach
    a, b, c = 0.9 <= e1 <= 1.1, 0.45 <= e2 <= 0.55, e3 <= 0.1
    ok = a and b and c
    record(5, ok, f"F={{0}}, r=1: {e1:.4f} in [0.9,1.1] {a}; two points r=0.5: {e2:.4f} in [0.45,0.55] {b}; "
                  f"two points r=1: {e3:.4f} <= 0.1 {c}")
    assert ok


# --- 6: semiconcavity ---------------------------------------------------------

def test_criterion_6_semiconcavity():
    f = sample_field(one_point(), Norm.euclid(2), grid((-2, -2), (2, 2), 0.02))
    far = semiconcavity_check(f, ((-2, -2), (2, 2)), 2.0, triples=100_000, band=(1, 2))
    near = semiconcavity_check(f, ((-0.1, -0.1), (0.1, 0.1)), 2.0, triples=100_000, band=(0.005, 0.1))
    ok = far.passed and far.tested == 100_000 and not near.passed and near.triple is not None
    record(6, ok, f"band (1,2) c=2: passed={far.passed} on {far.tested} triples (worst {far.worst:.2e}); "
                  f"near F: passed={near.passed}, worst {near.worst:.3g} at triple "
                  f"{[np.round(t, 4).tolist() for t in near.triple] if near.triple is not None else None}")
    assert ok


# --- 7: DC example |x| - |x - 1| -----------------------------------------------

def test_criterion_7_dc_example():
    f = DCFunction(abs_1d(0.0), abs_1d(1.0))
    pres = {}
    for delta in (1e-2, 1e-3, 1e-4):
        rep = morse_sard_check(f, (-3.0, 4.0), delta, s=0.5)
        assert sorted(rep.values) == [-1.0, 1.0]
        pres[delta] = rep.estimate.premeasure
    ok = all(math.isclose(pres[d], 2 * d**0.5, rel_tol=1e-12) for d in pres)
    record(7, ok, f"stationary values [-1, 1]; premeasure vs 2 delta^(1/2): "
                  + ", ".join(f"{d:g}: {p:.6g}" for d, p in pres.items()))
    assert ok


# --- 8: cone ------------------------------------------------------------------

def test_criterion_8_cone():
    t0 = time.perf_counter()
    pairs = random_admissible_pairs(THRESHOLD, 10_000, seed=0)
    violations = sum(not paper_inequality_check(a, b).passed for a, b in pairs)
    none_found = {a: obtuse_triple_search(a, 100_000, seed=0).witness is None
                  for a in (THRESHOLD, THRESHOLD + 0.1, 10.0)}
    small = obtuse_triple_search(0.1, 100_000, seed=0)
    mesh = ConeMesh(THRESHOLD, 1.05 * 2 * math.sqrt(1 + THRESHOLD**2))
    errs = []
    for a, b in random_admissible_pairs(THRESHOLD, 100, seed=1):
        exact = cone_intrinsic_distance(a, b)
        errs.append(abs(mesh_geodesic_distance(a, b, mesh) - exact) / max(exact, 1e-12))
    elapsed = time.perf_counter() - t0
    ok = (violations == 0 and all(none_found.values()) and small.witness is not None
          and max(errs) <= 5e-3 and elapsed <= 120)
    record(8, ok, f"inequality violations {violations}/10000; no obtuse triple at "
                  f"{[round(a, 4) for a in none_found]}: {list(none_found.values())}; witness at 0.1: "
                  f"{small.witness is not None}; mesh oracle max rel err {max(errs):.3%}; {elapsed:.1f} s")
    assert ok


# --- 9: lp:4 reruns -------------------------------------------------------------

def l4_hessian_max(points):
    """Largest Hessian eigenvalue of ||x||_4 at the given points (closed form)."""
    N = (np.abs(points) ** 4).sum(1) ** 0.25
    H = np.zeros((len(points), 2, 2))
    for i in range(2):
        for j in range(2):
            H[:, i, j] = 3 * points[:, i] ** 2 * (i == j) / N**3 - 3 * points[:, i] ** 3 * points[:, j] ** 3 / N**7
    return float(np.linalg.eigvalsh(H).max())


def exact_graph_slope(points, curve, window):
    """Largest slope of the exact curve over radial-normal windows at the points."""
    worst = 0.0
    for x in points:
        n = -x / np.linalg.norm(x)
        rel = curve[np.linalg.norm(curve - x, axis=1) <= window] - x
        height = rel @ n
        b = rel @ np.array([-n[1], n[0]])
        o = np.argsort(b)
        worst = max(worst, float(np.max(np.abs(np.diff(height[o]) / np.diff(b[o])))))
    return worst


def test_criterion_9_lp4_reruns():
    L4 = Norm.lp(4, 2)
    # two points under the lp:4 norm, directional criterion
    h, elapsed, P, V, fails, rep = two_point_pattern(L4, "directional")
    on_bisector = len(P) > 0 and float(np.abs(P[:, 0]).max()) <= 3 * h
    values_ok = len(V) > 0 and V.min() >= 1 - 2 * h - 1e-12 and V.max() <= 1 + 2 * h
    sweep_ok = len(fails) > 0 and bool(np.all(np.abs(fails - 1) <= 5 * h))
    no_stat = len(rep.stationary_violations) == 0
    # lp:4 unit circle
    hc = 0.01
    f = sample_field(one_point(), L4, grid((-1.5, -1.5), (1.5, 1.5), hc))
    mesh = extract_level_set(f, 1.0)
    curve = unit_circle_polyline(4)
    exact_len = float(np.linalg.norm(np.diff(curve, axis=0), axis=1).sum())
    chains = polylines(mesh)
    gs = lipschitz_graph_check(f, mesh, window=0.2, samples=50)
    L = max(g.lipschitz for g in gs)
    L_exact = exact_graph_slope(np.array([g.point for g in gs]), curve, 0.2)
    circle_ok = (len(chains) == 1 and abs(mesh.length() - exact_len) <= 0.01 * exact_len
                 and manifold_check(mesh).status == "Manifold" and all(g.passed for g in gs)
                 and L <= max(0.3, L_exact) + hc)
    # semiconcavity with c = 4 on d >= 1, after the Hessian oracle
    hess = l4_hessian_max(unit_circle_polyline(4, 100001))  # Hessian scales as 1/d
    g = sample_field(one_point(), L4, grid((-2, -2), (2, 2), 0.02))
    sc = semiconcavity_check(g, ((-2, -2), (2, 2)), 4.0, triples=100_000, band=(1, 2))
    semi_ok = hess <= 4.0 and sc.passed
    ok = on_bisector and values_ok and sweep_ok and no_stat and circle_ok and semi_ok
    record(9, ok, f"two points: {len(P)} critical vertices, max |x| {np.abs(P[:, 0]).max():.4g}, "
                  f"max |y| {np.abs(P[:, 1]).max():.4g}, values [{V.min():.6g}, {V.max():.6g}], "
                  f"NonManifold at {np.round(fails, 5).tolist()}; circle length {mesh.length():.5f} vs "
                  f"{exact_len:.5f}, L={L:.3f} (exact curve {L_exact:.3f}); Hessian max {hess:.4f} <= 4, "
                  f"c=4 semiconcavity {sc.passed}")
    assert ok


# --- 10: determinism -------------------------------------------------------------

def _run_cli(tmp_path, tag, threads, args):
    out = tmp_path / f"{tag}_{threads}.json"
    code = cli_main(args + ["--threads", str(threads), "--out", str(out)])
    assert code == 0
    return out.read_bytes()


def test_criterion_10_determinism(tmp_path):
    scene = tmp_path / "two_scene.json"
    scene.write_text('{"dim": 2, "primitives": [{"type": "point", "at": [-1, 0]}, '
                     '{"type": "point", "at": [1, 0]}]}')
    base = ["--scene", str(scene), "--bbox", "-2", "-2", "2", "2", "--res", "201"]
    jobs = {
        "crit": ["crit"] + base,
        "sweep": ["sweep"] + base + ["--rmin", "0.25", "--rmax", "1.75", "--count", "50"],
        "reach": ["reach"] + base + ["--r", "0.5", "--samples", "300", "--boundary-samples", "4"],
        "cone": ["cone", "--alpha", "0.1", "--samples", "5000"],
    }
    same = {}
    for tag, args in jobs.items():
        runs = [_run_cli(tmp_path, f"{tag}_a", 1, args), _run_cli(tmp_path, f"{tag}_b", 1, args),
                _run_cli(tmp_path, f"{tag}_c", 8, args)]
        same[tag] = runs[0] == runs[1] == runs[2]
    dumps = []
    for threads in (1, 8, 1):
        out = tmp_path / f"field_{len(dumps)}.bin"
        assert cli_main(["field"] + base + ["--threads", str(threads), "--out", str(out)]) == 0
        dumps.append(out.read_bytes() + out.with_suffix(".json").read_bytes())
    same["field"] = dumps[0] == dumps[1] == dumps[2]
    ok = all(same.values())
    record(10, ok, "byte-identical across repeats and threads 1/8: "
                   + ", ".join(f"{k}={v}" for k, v in same.items()))
    assert ok
