"""Reach of superlevel sets A = {d >= r} estimated from a sampled field.

The boundary of A is represented by points on grid edges located with
4-point cubic interpolation along the grid line, joined by centripetal
Catmull-Rom arcs and resampled finely. Projections onto A use this point
set; a projection counts as unique when every near-minimiser lies within
``3h`` of the best one. A point is a near-minimiser when its distance to q
exceeds the minimum d by at most ``NEAR_TOL * h**2 / d``. With this scaling
the region of rejected queries around a centre of curvature of radius R has
radius about ``(2 * NEAR_TOL / 9) * R``, independent of h.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .field import DistanceField, interpolate
from .levelset import extract_level_set, polylines

NEAR_TOL = 0.25  # near-minimiser tolerance in units of h**2 / d
UNIQUE_FACTOR = 3.0  # uniqueness radius in units of h
SUBDIVIDE = 4


class ReachError(ValueError):
    pass


# --- boundary representation ------------------------------------------------

def _refine_on_edges(field: DistanceField, r: float, verts: np.ndarray) -> np.ndarray:
    """Move level-set vertices along their grid edge to the root of a cubic fit."""
    g = field.grid
    v = np.asarray(field.values)
    origin = np.asarray(g.origin)
    rel = (verts - origin) / g.h
    out = verts.copy()
    dims = np.asarray(v.shape)
    for n, x in enumerate(rel):
        frac = np.abs(x - np.round(x))
        ax = int(np.argmax(frac))  # the axis along which the vertex moves
        base = np.round(x).astype(int)
        i0 = int(np.floor(x[ax]))
        if not (1 <= i0 and i0 + 2 < dims[ax]):
            continue
        idx = [tuple(np.r_[base[:ax], i0 + k, base[ax + 1 :]]) for k in (-1, 0, 1, 2)]
        y = np.array([v[i] for i in idx]) - r
        # Lagrange cubic through nodes -1, 0, 1, 2
        c = np.polyfit(np.array([-1.0, 0.0, 1.0, 2.0]), y, 3)
        t = x[ax] - i0
        for _ in range(20):
            f = np.polyval(c, t)
            df = np.polyval(np.polyder(c), t)
            if df == 0:
                break
            step = f / df
            t -= step
            if abs(step) < 1e-15:
                break
        if 0.0 <= t <= 1.0 and np.sign(y[1]) != np.sign(y[2]):
            p = x.copy()
            p[ax] = i0 + t
            out[n] = origin + g.h * p
    return out


def _catmull_rom(P: np.ndarray, closed: bool, m: int) -> np.ndarray:
    """Centripetal Catmull-Rom resampling with m points per segment."""
    if len(P) < 2:
        return P
    if closed:
        Q = np.vstack([P[-1:], P, P[:2]])
    else:
        Q = np.vstack([2 * P[:1] - P[1:2], P, 2 * P[-1:] - P[-2:-1]])
    P0, P1, P2, P3 = Q[:-3], Q[1:-2], Q[2:-1], Q[3:]
    seg = lambda a, b: np.maximum(np.linalg.norm(b - a, axis=1) ** 0.5, 1e-12)[:, None]
    t0 = np.zeros((len(P0), 1))
    t1 = t0 + seg(P0, P1)
    t2 = t1 + seg(P1, P2)
    t3 = t2 + seg(P2, P3)
    u = np.arange(m) / m
    T = (t1 + (t2 - t1) * u[None, :])[:, :, None]  # (S, m, 1)
    t0, t1, t2, t3 = (a[:, None, :] for a in (t0, t1, t2, t3))
    P0, P1, P2, P3 = (a[:, None, :] for a in (P0, P1, P2, P3))
    A1 = ((t1 - T) * P0 + (T - t0) * P1) / (t1 - t0)
    A2 = ((t2 - T) * P1 + (T - t1) * P2) / (t2 - t1)
    A3 = ((t3 - T) * P2 + (T - t2) * P3) / (t3 - t2)
    B1 = ((t2 - T) * A1 + (T - t0) * A2) / (t2 - t0)
    B2 = ((t3 - T) * A2 + (T - t1) * A3) / (t3 - t1)
    C = ((t2 - T) * B1 + (T - t1) * B2) / (t2 - t1)
    pts = C.reshape(-1, P.shape[1])
    return pts if closed else np.vstack([pts, P[-1:]])


@dataclass
class SuperlevelSet:
    field: DistanceField
    r: float
    boundary: np.ndarray  # dense boundary samples
    nodes: np.ndarray  # refined level-set vertices
    tree: cKDTree
    h: float
    unique_radius: float

    def tol(self, d):
        """Near-minimiser tolerance at nearest distance d."""
        return NEAR_TOL * self.h**2 / np.maximum(d, self.h)

    def contains(self, Q) -> np.ndarray:
        return np.asarray(interpolate(self.field, Q)) >= self.r


def superlevel_set(field: DistanceField, r: float) -> SuperlevelSet:
    if field.grid.dim != 2:
        raise ReachError("reach estimation is implemented for planar fields")
    if not field.values.max() >= r:
        raise ReachError(f"the superlevel set {{d >= {r}}} is empty on this grid")
    mesh = extract_level_set(field, r)
    nodes = _refine_on_edges(field, mesh.r, mesh.vertices)
    chains = [_catmull_rom(nodes[idx], cl, SUBDIVIDE) for idx, cl in polylines(mesh)]
    pts = np.vstack(chains)
    h = field.h
    return SuperlevelSet(field, mesh.r, pts, nodes, cKDTree(pts), h, UNIQUE_FACTOR * h)


@dataclass
class Projection:
    query: np.ndarray
    points: np.ndarray  # near-minimisers
    distance: float

    @property
    def unique(self) -> bool:
        return len(self.points) == 1


def _spread(A: SuperlevelSet, Q: np.ndarray, K: int = 256):
    """For points outside A: max distance of near-minimisers to the best one.

    Only the K nearest samples are inspected; when all K are near-minimisers
    the set is reported as unbounded (inf), since K samples cover far more
    than 3h of boundary.
    """
    d, _ = A.tree.query(Q)
    bound = d + A.tol(d)
    K = min(K, len(A.boundary))
    D, I = A.tree.query(Q, k=K, distance_upper_bound=float(bound.max()) * (1 + 1e-12))
    within = D <= bound[:, None]
    best = A.boundary[I[:, 0]]
    P = A.boundary[np.where(within, I, I[:, :1])]
    spread = np.max(np.linalg.norm(P - best[:, None, :], axis=2), axis=1)
    return np.where(within[:, -1], np.inf, spread)


def project_to_superlevel(field: DistanceField, r: float, q, tol=None, A: SuperlevelSet | None = None) -> Projection:
    """Nearest points of A = {d >= r} to q; clusters closer than 3h count as one point."""
    A = superlevel_set(field, r) if A is None else A
    q = np.asarray(q, dtype=float)
    if A.contains(q[None, :])[0]:
        return Projection(q, q[None, :], 0.0)
    d, k = A.tree.query(q)
    tol = A.tol(d) if tol is None else tol
    near = A.boundary[A.tree.query_ball_point(q, d + tol)]
    # greedy clustering at the uniqueness radius, best point first
    order = np.argsort(np.linalg.norm(near - q, axis=1), kind="stable")
    reps = []
    for p in near[order]:
        if all(np.linalg.norm(p - s) > A.unique_radius for s in reps):
            reps.append(p)
    return Projection(q, np.array(reps), float(d))


def unique_projection(A: SuperlevelSet, Q: np.ndarray) -> np.ndarray:
    """Vectorised uniqueness test; points of A project to themselves."""
    inside = A.contains(Q)
    ok = np.ones(len(Q), dtype=bool)
    out = np.flatnonzero(~inside)
    if len(out):
        spread = _spread(A, Q[out])
        ok[out] = spread <= A.unique_radius
    return ok


# --- estimates ---------------------------------------------------------------

@dataclass
class ReachEstimate:
    p: np.ndarray
    epsilon: float
    samples: int
    tolerance: float
    cap: float

    def to_dict(self):
        return {"p": self.p.tolist(), "epsilon": self.epsilon, "samples": self.samples,
                "tolerance": self.tolerance, "cap": self.cap}


def default_cap(field: DistanceField) -> float:
    g = field.grid
    return 0.5 * float(np.linalg.norm(g.upper - np.asarray(g.origin)))


def _disk_samples(dim, samples, seed):
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(samples, dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    rad = np.random.default_rng(seed + 1).uniform(size=(samples, 1)) ** (1.0 / dim)
    return d * rad


def estimate_reach_at(field: DistanceField, r: float, p, samples: int = 1000, cap=None, seed: int = 0,
                      A: SuperlevelSet | None = None, iterations: int = 12, growth: float = 1.25) -> ReachEstimate:
    """Largest eps such that all sampled q in B(p, eps) project uniquely.

    eps grows geometrically from h until the first rejection (or the cap),
    then the bracket is bisected. Samples outside the grid are ignored.
    """
    A = superlevel_set(field, r) if A is None else A
    p = np.asarray(p, dtype=float)
    h = field.h
    if A.tree.query(p)[0] > 2 * h:
        raise ReachError(f"{p} is not on the extracted boundary of A")
    cap = default_cap(field) if cap is None else float(cap)
    unit = _disk_samples(len(p), samples, seed)
    lo_b, hi_b = np.asarray(field.grid.origin), field.grid.upper

    def accepted(eps):
        Q = p + eps * unit
        Q = Q[np.all((Q >= lo_b) & (Q <= hi_b), axis=1)]
        return bool(np.all(unique_projection(A, Q)))

    lo, hi = 0.0, None
    eps = min(h, cap)
    while hi is None:
        if accepted(eps):
            lo = eps
            if eps >= cap:
                return ReachEstimate(p, cap, samples, A.unique_radius, cap)
            eps = min(cap, eps * growth)
        else:
            hi = eps
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if accepted(mid):
            lo = mid
        else:
            hi = mid
    return ReachEstimate(p, lo, samples, A.unique_radius, cap)


def boundary_points(A: SuperlevelSet, count: int) -> np.ndarray:
    """``count`` boundary nodes spread evenly by arc length over all chains."""
    mesh = extract_level_set(A.field, A.r)
    chains = polylines(mesh)
    P = np.vstack([A.nodes[idx] for idx, _ in chains])
    steps = np.concatenate([[0.0], np.linalg.norm(np.diff(P, axis=0), axis=1)])
    # jumps between chains do not count as length
    starts = np.cumsum([0] + [len(idx) for idx, _ in chains[:-1]])
    steps[starts] = 0.0
    s = np.cumsum(steps)
    targets = (np.arange(count) + 0.5) / count * s[-1]
    return P[np.minimum(np.searchsorted(s, targets), len(P) - 1)]


@dataclass
class ReachReport:
    r: float
    global_reach: float
    per_point: list

    def to_dict(self):
        return {"r": self.r, "global_reach": self.global_reach, "per_point": [e.to_dict() for e in self.per_point]}


def estimate_reach(field: DistanceField, r: float, boundary_samples: int = 16, samples: int = 1000,
                   cap=None, seed: int = 0) -> ReachReport:
    """Minimum of per-point estimates over quasi-uniform boundary points."""
    A = superlevel_set(field, r)
    base = boundary_points(A, boundary_samples)
    per = [estimate_reach_at(field, r, p, samples, cap, seed + k, A) for k, p in enumerate(base)]
    return ReachReport(float(r), float(min(e.epsilon for e in per)), per)
