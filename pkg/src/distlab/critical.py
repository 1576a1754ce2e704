"""Regular and critical points of distance functions.

Two independent tests are provided. The hull test (Euclidean norm only)
declares x regular when the unit directions to its nearest points fit in an
open half-space with margin eta. The directional test works for any norm: x is
regular when one sampled direction decreases the interpolated field at rate
at least ``margin`` from every probe point of a small neighbourhood.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernels
from .field import DistanceField, OutOfBounds, interpolate
from .norms import Norm, norm_eval, sample_unit_sphere
from .scene import ClosedSet, NearestSet, distance, nearest_table

DEFAULT_ETA = 1e-3
DEFAULT_PROBES = 16
SCAN_CHUNK = 16384
STATIONARY_BOUND = -0.5


def default_directions(dim: int) -> int:
    return 32 if dim == 2 else 128


@dataclass
class CriticalVerdict:
    point: np.ndarray
    regular: bool
    criterion: str
    margin: float
    v: np.ndarray | None = None
    eps: float | None = None

    @property
    def status(self) -> str:
        return "Regular" if self.regular else "Critical"


# --- hull test ---------------------------------------------------------------

def min_norm_hull(U) -> np.ndarray:
    """Exact nearest point to the origin of conv(U) for a few points in R^2 or R^3.

    Every face of dimension < dim spanned by affinely independent points is a
    candidate; the answer is the smallest candidate p with <p, u> >= |p|^2
    for all u. If no candidate qualifies the origin lies in the hull.
    """
    U = np.asarray(U, dtype=float)
    n, dim = U.shape
    best = None
    cands = []
    for k in range(1, min(n, dim) + 1):
        for S in itertools.combinations(range(n), k):
            A = U[list(S)]
            if k == 1:
                cands.append(A[0])
                continue
            # minimise |A0 + sum l_i (A_i - A0)|
            B = (A[1:] - A[0]).T
            lam, *_ = np.linalg.lstsq(B, -A[0], rcond=None)
            if np.linalg.matrix_rank(B) < k - 1:
                continue
            w = np.concatenate([[1 - lam.sum()], lam])
            if np.all(w >= -1e-12):
                cands.append(A[0] + B @ lam)
    cands.sort(key=lambda p: float(p @ p))
    for p in cands:
        pp = float(p @ p)
        if np.all(U @ p >= pp - 1e-12 * max(1.0, pp)):
            best = p
            break
    return np.zeros(dim) if best is None else best


def hull_criterion(near, eta: float = DEFAULT_ETA) -> CriticalVerdict:
    """Regular iff some unit w has <w, u> <= -eta for every witness direction u.

    ``near`` is a NearestSet (Euclidean) or an array of unit directions.
    The returned v is the optimal escape direction and eps its margin.
    """
    U = near.directions if isinstance(near, NearestSet) else np.asarray(near, dtype=float)
    point = near.query if isinstance(near, NearestSet) else np.zeros(U.shape[1] if U.ndim == 2 else 0)
    if U.ndim != 2 or len(U) == 0:
        raise ValueError("hull criterion needs at least one direction")
    U = U / np.linalg.norm(U, axis=1, keepdims=True)
    if U.shape[1] == 2:
        m, v = kernels.hull_margin_2d(U[None], np.array([len(U)], dtype=np.int64))
        margin, v = float(m[0]), v[0]
    else:
        p = min_norm_hull(U)
        margin = float(np.linalg.norm(p))
        v = -p / margin if margin > 0 else np.zeros(U.shape[1])
    if margin >= eta and margin > 0:
        return CriticalVerdict(point, True, "Hull", margin, v, margin)
    return CriticalVerdict(point, False, "Hull", margin)


def _hull_scan(scene: ClosedSet, X: np.ndarray, tau: float, eta: float):
    """Hull margins at many points using all witnesses within tau (no merging)."""
    D, P = nearest_table(scene, X, Norm.euclid(scene.dim))
    dmin = D.min(axis=1)
    close = D <= dmin[:, None] + tau
    counts = close.sum(axis=1)
    K = int(counts.max())
    # nearest witness first
    order = np.argsort(np.where(close, D, np.inf), axis=1, kind="stable")[:, :K]
    W = np.take_along_axis(P, order[:, :, None], axis=1)
    U = W - X[:, None, :]
    U = U / np.linalg.norm(U, axis=2, keepdims=True)
    eta_eff = np.maximum(eta, tau / dmin)
    if scene.dim == 2:
        U = np.where((np.arange(K)[None, :] < counts[:, None])[:, :, None], U, 0.0)
        margin, v = kernels.hull_margin_2d(U, counts.astype(np.int64))
    else:
        margin = np.ones(len(X))
        v = -U[:, 0, :].copy()
        for n in np.flatnonzero(counts > 1):
            p = min_norm_hull(U[n, : counts[n]])
            margin[n] = np.linalg.norm(p)
            v[n] = -p / margin[n] if margin[n] > 0 else 0.0
    regular = (margin >= eta_eff) & (margin > 0)
    return regular, margin, v, U[:, 0, :]


# --- directional test --------------------------------------------------------

@dataclass(frozen=True)
class DirectionalSetup:
    delta: float
    dirs: np.ndarray
    offsets: np.ndarray
    ts: np.ndarray
    margin: float


def directional_setup(norm: Norm, h: float, delta=None, directions=None, probes=DEFAULT_PROBES,
                      seed: int = 0, margin: float = DEFAULT_ETA) -> DirectionalSetup:
    """Shared sampling pattern: norm-unit directions and probe offsets in B(0, delta)."""
    delta = 4 * h if delta is None else float(delta)
    directions = default_directions(norm.dim) if directions is None else int(directions)
    dirs = sample_unit_sphere(norm, directions, seed)
    rng = np.random.default_rng(seed + 1)
    g = rng.normal(size=(max(probes - 1, 0), norm.dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    rad = rng.uniform(size=(len(g), 1)) ** (1.0 / norm.dim)
    offsets = np.vstack([np.zeros((1, norm.dim)), delta * rad * g])
    ts = np.array([delta / 4, delta / 2, delta])
    return DirectionalSetup(delta, dirs, offsets, ts, float(margin))


def _first_candidates(field: DistanceField, X, setup: DirectionalSetup, scale):
    """Negated min-norm probe gradient, norm-unit; NaN where it vanishes."""
    g = field.grid
    p = kernels.probe_min_norm_gradients(field.values, np.asarray(g.origin), g.h, X, setup.offsets, scale)
    size = np.sqrt(np.sum(p * p, axis=1))
    ok = size > 1e-9
    first = np.full_like(p, np.nan)
    first[ok] = -p[ok] / np.asarray(norm_eval(field.norm, -p[ok])).reshape(-1, 1)
    return first


def _directional_batch(field: DistanceField, X, setup: DirectionalSetup, scale=None):
    g = field.grid
    scale = np.ones(len(X)) if scale is None else scale
    first = _first_candidates(field, X, setup, scale)
    return kernels.directional_scan(
        field.values, np.asarray(g.origin), g.h, X, first, setup.dirs,
        setup.offsets, setup.ts, setup.delta, setup.margin, scale,
    )


def _check_ball(field: DistanceField, x, radius):
    g = field.grid
    if np.any(x - radius < np.asarray(g.origin) - 1e-9) or np.any(x + radius > g.upper + 1e-9):
        raise OutOfBounds("directional neighbourhood leaves the grid")


def directional_criterion(field: DistanceField, x, delta=None, directions=None, probes=DEFAULT_PROBES,
                          seed: int = 0, margin: float = DEFAULT_ETA, exact: bool = False) -> CriticalVerdict:
    """Sampled descent test on B(x, delta); ``exact`` evaluates the scene instead of the grid."""
    x = np.asarray(x, dtype=float)
    setup = directional_setup(field.norm, field.h, delta, directions, probes, seed, margin)
    _check_ball(field, x, 2 * setup.delta)
    if exact:
        return _directional_exact(field, x, setup)
    passed, eps, which = _directional_batch(field, x[None, :], setup)
    if passed[0]:
        v = _first_candidates(field, x[None, :], setup, np.ones(1))[0] if which[0] == 0 else setup.dirs[which[0] - 1]
        return CriticalVerdict(x, True, "Directional", float(eps[0]), v, float(eps[0]))
    return CriticalVerdict(x, False, "Directional", float(eps[0]))


def _directional_exact(field: DistanceField, x, setup: DirectionalSetup) -> CriticalVerdict:
    F, norm = field.scene, field.norm
    Z = x + setup.offsets
    fz = distance(F, Z, norm)
    cands = [setup.dirs[i] for i in range(len(setup.dirs))]
    first = _first_candidates(field, x[None, :], setup, np.ones(1))[0]
    if np.all(np.isfinite(first)):
        cands.insert(0, first)
    best = -math.inf
    for v in cands:
        worst = -math.inf
        for t in setup.ts:
            Y = Z + t * v
            inside = np.sum((Y - x) ** 2, axis=1) <= setup.delta**2
            if inside.any():
                q = (distance(F, Y[inside], norm) - fz[inside]) / t
                worst = max(worst, float(q.max()))
        if worst == -math.inf:
            continue
        if worst < -setup.margin:
            return CriticalVerdict(x, True, "Directional", -worst, v, -worst)
        best = max(best, -worst)
    return CriticalVerdict(x, False, "Directional", best)


# --- scans -------------------------------------------------------------------

@dataclass
class HausdorffEstimate:
    s: float
    delta: float
    cover: list
    premeasure: float

    def to_dict(self):
        return {"s": self.s, "delta": self.delta, "premeasure": self.premeasure, "intervals": len(self.cover)}


def hausdorff_box_estimate(values, s: float, delta: float) -> HausdorffEstimate:
    """Greedy cover of sorted values by intervals [v, v + delta].

    Each interval is charged its nominal length delta, so the premeasure is
    (number of intervals) * delta**s; isolated values still cost delta**s.
    """
    if not (s > 0 and delta > 0):
        raise ValueError("s and delta must be positive")
    vals = np.sort(np.asarray(values, dtype=float).ravel())
    cover = []
    i = 0
    while i < len(vals):
        start = vals[i]
        j = int(np.searchsorted(vals, start + delta, side="right"))
        cover.append((float(start), float(start + delta)))
        i = j
    return HausdorffEstimate(float(s), float(delta), cover, len(cover) * delta**s)


def dedup_sorted(values, resolution: float = 1e-12):
    vals = np.sort(np.asarray(values, dtype=float))
    if len(vals) == 0:
        return vals
    keep = np.concatenate([[True], np.diff(vals) > resolution])
    return vals[keep]


@dataclass
class CriticalReport:
    params: dict
    scanned: np.ndarray  # flat vertex indices
    regular: np.ndarray
    margin: np.ndarray
    critical_points: np.ndarray
    critical_values: np.ndarray
    hausdorff: HausdorffEstimate
    stationary_violations: np.ndarray = dc_field(default_factory=lambda: np.zeros((0, 2)))

    def verdicts(self, grid):
        pts = grid.vertices(self.scanned)
        crit = self.params["criterion"]
        return [CriticalVerdict(p, bool(r), crit, float(m)) for p, r, m in zip(pts, self.regular, self.margin)]

    def to_dict(self):
        return {
            "params": self.params,
            "critical_points": self.critical_points.tolist(),
            "critical_values": self.critical_values.tolist(),
            "hausdorff": {"s": self.hausdorff.s, "delta": self.hausdorff.delta,
                          "premeasure": self.hausdorff.premeasure},
            "stationary_violations": self.stationary_violations.tolist(),
        }


def scan_indices(field: DistanceField, min_distance: float, pad: int):
    """Flat indices of vertices at least ``pad`` cells inside with value > min_distance."""
    dims = field.grid.dims
    mask = field.values > min_distance
    inner = np.zeros(dims, dtype=bool)
    inner[tuple(slice(pad, n - pad) for n in dims)] = True
    return np.flatnonzero((mask & inner).ravel())


def stationary_quotients(field: DistanceField, X, U):
    """(f(x + h u) - f(x)) / h on the interpolated field along witness directions u."""
    h = field.h
    return (interpolate(field, X + h * U) - interpolate(field, X)) / h


def critical_scan(field: DistanceField, scene: ClosedSet | None = None, norm: Norm | None = None,
                  eta: float = DEFAULT_ETA, delta=None, directions=None, probes=DEFAULT_PROBES,
                  seed: int = 0, criterion: str = "auto", tau=None, threads: int = 1) -> CriticalReport:
    """Classify interior vertices with value > 3h and collect critical values.

    ``criterion`` is "hull", "directional" or "auto" (hull for the Euclidean
    norm). Scanned vertices keep a margin of 2*delta from the grid boundary so
    both criteria see the same vertex set. Every scanned vertex is also
    checked for a witness direction of decrease rate at least 0.5.
    """
    scene = field.scene if scene is None else scene
    norm = field.norm if norm is None else norm
    h = field.h
    if criterion == "auto":
        criterion = "hull" if norm.is_euclidean else "directional"
    if criterion == "hull" and not norm.is_euclidean:
        raise ValueError("the hull criterion is only valid for the Euclidean norm")
    setup = directional_setup(norm, h, delta, directions, probes, seed, eta)
    tau = 2 * h if tau is None else float(tau)
    pad = int(math.ceil(2 * setup.delta / h - 1e-9))
    idx = scan_indices(field, 3 * h, pad)
    chunks = [idx[s : s + SCAN_CHUNK] for s in range(0, len(idx), SCAN_CHUNK)]

    def work(chunk):
        X = field.grid.vertices(chunk)
        if criterion == "hull":
            regular, margin, _, U0 = _hull_scan(scene, X, tau, eta)
        else:
            # keep the probe ball away from F: radius min(delta, d/2)
            dx = field.values.ravel()[chunk]
            scale = np.minimum(1.0, dx / (2 * setup.delta))
            regular, margin, _ = _directional_batch(field, X, setup, scale)
            D, P = nearest_table(scene, X, norm)
            W = np.take_along_axis(P, np.argmin(D, axis=1)[:, None, None], axis=1)[:, 0]
            U0 = (W - X) / np.asarray(norm_eval(norm, W - X)).reshape(-1, 1)
        q = stationary_quotients(field, X, U0)
        return regular, margin, q

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(c) for c in chunks]
    if results:
        regular = np.concatenate([r[0] for r in results])
        margin = np.concatenate([r[1] for r in results])
        quot = np.concatenate([r[2] for r in results])
    else:
        regular, margin, quot = np.zeros(0, bool), np.zeros(0), np.zeros(0)
    crit_idx = idx[~regular]
    pts = field.grid.vertices(crit_idx)
    values = field.values.ravel()[crit_idx]
    cvals = dedup_sorted(values)
    s = (field.grid.dim - 1) / 2
    haus = hausdorff_box_estimate(cvals, s, 4 * h)
    params = {
        "criterion": criterion, "eta": eta, "tau": tau, "delta": setup.delta,
        "directions": len(setup.dirs), "probes": len(setup.offsets), "seed": seed,
        "h": h, "norm": norm.spec(), "scanned": int(len(idx)),
    }
    bad = idx[quot > STATIONARY_BOUND]
    return CriticalReport(params, idx, regular, margin, pts, cvals, haus, field.grid.vertices(bad))


# --- DC parts ----------------------------------------------------------------

DC_STEPS = (1e-3, 1e-4, 1e-5)


def _richardson(g, x, v):
    g0 = g(x)
    q = [(g(x + t * v) - g0) / t for t in DC_STEPS]
    R = [(10 * q[i + 1] - q[i]) / 9 for i in range(len(q) - 1)]
    return R


def dc_regularity_probe(f_plus, f_minus, x, v, tol: float = 1e-4, gap: float = 1e-3) -> str:
    """'Regular' when both parts have stable two-sided derivatives along v that differ.

    Returns 'Inconclusive' otherwise; a critical verdict is never issued.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    derivs = []
    for g in (f_plus, f_minus):
        Rp = _richardson(g, x, v)
        Rm = _richardson(g, x, -v)
        stable = abs(Rp[0] - Rp[1]) <= tol and abs(Rm[0] - Rm[1]) <= tol
        two_sided = abs(Rp[-1] + Rm[-1]) <= tol
        if not (stable and two_sided):
            return "Inconclusive"
        derivs.append(Rp[-1])
    return "Regular" if abs(derivs[0] - derivs[1]) > gap else "Inconclusive"
