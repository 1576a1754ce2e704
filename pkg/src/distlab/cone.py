"""Directions on the boundary of the cone C = A x R in R^4, A = {alpha^2 (x^2 + y^2) = z^2, z >= 0}.

A direction is xi = (r cos t, r sin t, alpha r, s). The lateral surface of A
unrolls to a planar sector whose angle is compressed by k = 1 / sqrt(1 + alpha^2);
the intrinsic metric on the boundary of C is the product of that metric with R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

THRESHOLD = math.sqrt(2 * math.pi**2 - 1)  # alpha from which no obtuse triple exists
OBTUSE_MARGIN = 1e-6
CLAMP_LIMIT = 1e-9
SLACK = 1e-9


class ConeError(ValueError):
    pass


@dataclass(frozen=True)
class ConeDirection:
    r: float
    theta: float
    s: float
    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConeError("alpha must be positive")
        if self.r < 0:
            raise ConeError("r must be nonnegative")
        object.__setattr__(self, "theta", float(self.theta) % (2 * math.pi))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.r * math.cos(self.theta), self.r * math.sin(self.theta), self.alpha * self.r, self.s])

    @property
    def norm(self) -> float:
        return math.sqrt(self.r**2 * (1 + self.alpha**2) + self.s**2)

    def scaled(self, c: float) -> "ConeDirection":
        return ConeDirection(c * self.r, self.theta, c * self.s, self.alpha)


def _same_alpha(a: ConeDirection, b: ConeDirection):
    if a.alpha != b.alpha:
        raise ConeError("directions belong to different cones")


def wrapped_angle(t1, t2):
    """Angular separation in [0, pi]."""
    d = np.abs(np.asarray(t1) - np.asarray(t2)) % (2 * np.pi)
    return np.minimum(d, 2 * np.pi - d)


def cone_path_length(a: ConeDirection, b: ConeDirection) -> float:
    """Length of the path that keeps r fixed and moves theta and s linearly."""
    _same_alpha(a, b)
    if abs(a.r - b.r) > 1e-12 * max(1.0, a.r, b.r):
        raise ConeError("the connecting path needs equal radial factors")
    return math.hypot((b.theta - a.theta) * a.r, b.s - a.s)


# --- vectorised metric -------------------------------------------------------

def _dist2(r1, t1, s1, r2, t2, s2, alpha):
    q = np.sqrt(1 + alpha**2)
    k = 1 / q
    l1, l2 = r1 * q, r2 * q
    phi = k * wrapped_angle(t1, t2)
    cone2 = np.where(phi <= np.pi, l1**2 + l2**2 - 2 * l1 * l2 * np.cos(phi), (l1 + l2) ** 2)
    return np.maximum(cone2, 0.0) + (s1 - s2) ** 2


def _cos_angle(r1, t1, s1, r2, t2, s2, alpha):
    n1 = r1**2 * (1 + alpha**2) + s1**2
    n2 = r2**2 * (1 + alpha**2) + s2**2
    return (n1 + n2 - _dist2(r1, t1, s1, r2, t2, s2, alpha)) / (2 * np.sqrt(n1 * n2))


def cone_intrinsic_distance(a: ConeDirection, b: ConeDirection) -> float:
    _same_alpha(a, b)
    return float(np.sqrt(_dist2(a.r, a.theta, a.s, b.r, b.theta, b.s, a.alpha)))


@dataclass
class Angle:
    value: float
    clamp: float  # how far the cosine was outside [-1, 1]

    def __float__(self):
        return self.value


def cone_angle(a: ConeDirection, b: ConeDirection) -> Angle:
    """Angle at the apex from the intrinsic distance (law of cosines)."""
    _same_alpha(a, b)
    if a.norm == 0 or b.norm == 0:
        raise ConeError("the zero vector has no direction")
    c = float(_cos_angle(a.r, a.theta, a.s, b.r, b.theta, b.s, a.alpha))
    cl = min(1.0, max(-1.0, c))
    clamp = abs(c - cl)
    if clamp > CLAMP_LIMIT:
        raise ConeError(f"cosine {c} is outside [-1, 1] by more than {CLAMP_LIMIT}")
    return Angle(math.acos(cl), clamp)


@dataclass
class InequalityVerdict:
    passed: bool
    dist2: float
    path2: float
    bound: float
    norms2: float


def paper_inequality_check(a: ConeDirection, b: ConeDirection) -> InequalityVerdict:
    """dist^2 <= path^2 <= 4 pi^2 r^2 + s1^2 + s2^2 <= |a|^2 + |b|^2."""
    _same_alpha(a, b)
    if a.s * b.s < 0:
        raise ConeError("the chain needs s1 * s2 >= 0")
    if a.alpha < THRESHOLD - 1e-12:
        raise ConeError(f"the chain needs alpha >= {THRESHOLD}")
    d2 = cone_intrinsic_distance(a, b) ** 2
    p2 = cone_path_length(a, b) ** 2
    bound = 4 * math.pi**2 * a.r**2 + a.s**2 + b.s**2
    n2 = a.norm**2 + b.norm**2
    ok = d2 <= p2 + SLACK and p2 <= bound + SLACK and bound <= n2 + SLACK
    return InequalityVerdict(bool(ok), d2, p2, bound, n2)


def random_admissible_pairs(alpha: float, count: int, seed: int = 0):
    """Pairs with equal r and s-values of equal sign."""
    rng = np.random.default_rng(seed)
    r = rng.uniform(0, 2, count)
    t = rng.uniform(0, 2 * np.pi, (count, 2))
    s = np.abs(rng.normal(size=(count, 2))) * rng.choice([-1.0, 1.0], size=(count, 1))
    return [(ConeDirection(r[i], t[i, 0], s[i, 0], alpha), ConeDirection(r[i], t[i, 1], s[i, 1], alpha))
            for i in range(count)]


# --- obtuse triple search ----------------------------------------------------

def _directions(P, alpha):
    """Unit directions from parameters (phi, theta): r sqrt(1+a^2) = sin phi, s = cos phi."""
    phi = np.clip(P[..., 0], 0.0, np.pi)
    return np.sin(phi) / np.sqrt(1 + alpha**2), P[..., 1], np.cos(phi)


def _min_pairwise_angle(P, alpha):
    """P: (..., 3, 2) triple parameters -> smallest pairwise angle."""
    r, t, s = _directions(P, alpha)
    worst = np.full(P.shape[:-2], np.pi)
    for i, j in ((0, 1), (0, 2), (1, 2)):
        c = np.clip(_cos_angle(r[..., i], t[..., i], s[..., i], r[..., j], t[..., j], s[..., j], alpha), -1, 1)
        worst = np.minimum(worst, np.arccos(c))
    return worst


@dataclass
class TripleSearch:
    alpha: float
    samples: int
    seed: int
    max_min_angle: float
    witness: list | None  # three ConeDirection, or None

    def to_dict(self):
        w = None if self.witness is None else [
            {"r": d.r, "theta": d.theta, "s": d.s} for d in self.witness]
        return {"alpha": self.alpha, "samples": self.samples, "seed": self.seed,
                "witness": w, "max_min_pairwise_angle": self.max_min_angle}


def _refine(P, alpha, rounds=20, step=0.2):
    """Coordinate descent on the smallest pairwise angle, all candidates at once."""
    P = P.copy()
    best = _min_pairwise_angle(P, alpha)
    for _ in range(rounds):
        for a in range(3):
            for c in range(2):
                for sign in (1.0, -1.0):
                    Q = P.copy()
                    Q[:, a, c] += sign * step
                    val = _min_pairwise_angle(Q, alpha)
                    better = val > best
                    P[better], best[better] = Q[better], val[better]
        step *= 0.7
    return P, best


def obtuse_triple_search(alpha: float, samples: int = 100_000, seed: int = 0, refine: int = 32) -> TripleSearch:
    """Look for three directions with all pairwise angles > pi/2 + 1e-6."""
    if samples < 3:
        raise ConeError("need at least three samples")
    if not alpha > 0:
        raise ConeError("alpha must be positive")
    rng = np.random.default_rng(seed)
    P = np.empty((samples, 3, 2))
    P[..., 0] = np.arccos(rng.uniform(-1, 1, (samples, 3)))
    P[..., 1] = rng.uniform(0, 2 * np.pi, (samples, 3))
    score = _min_pairwise_angle(P, alpha)
    top = np.argsort(-score, kind="stable")[: min(refine, samples)]
    R, rs = _refine(P[top], alpha)
    k = int(np.argmax(rs))
    best = float(max(rs[k], score[top[0]]))
    witness = None
    if best > np.pi / 2 + OBTUSE_MARGIN:
        cand = R[k] if rs[k] >= score[top[0]] else P[top[0]]
        r, t, s = _directions(cand, alpha)
        dirs = [ConeDirection(float(r[i]), float(t[i]), float(s[i]), alpha) for i in range(3)]
        # re-verify through the scalar angle routine
        if all(cone_angle(dirs[i], dirs[j]).value > np.pi / 2 + OBTUSE_MARGIN for i, j in ((0, 1), (0, 2), (1, 2))):
            witness = dirs
    return TripleSearch(float(alpha), int(samples), int(seed), best, witness)


# --- mesh-geodesic oracle ----------------------------------------------------

def _embed(rho, theta, alpha):
    """Point at slant distance rho on the lateral surface of A, in R^3."""
    q = np.sqrt(1 + alpha**2)
    return np.stack([rho / q * np.cos(theta), rho / q * np.sin(theta), alpha * rho / q], axis=-1)


class ConeMesh:
    """Triangulated lateral surface (apex + n_rho rings of n_theta vertices) with a Dijkstra graph."""

    def __init__(self, alpha: float, rho_max: float, n_theta: int = 500, n_rho: int = 100):
        self.alpha, self.n_theta, self.n_rho = alpha, n_theta, n_rho
        self.rho = np.linspace(0, rho_max, n_rho + 1)[1:]
        self.theta = np.arange(n_theta) * (2 * np.pi / n_theta)
        R, T = np.meshgrid(self.rho, self.theta, indexing="ij")
        self.points = np.vstack([np.zeros((1, 3)), _embed(R.ravel(), T.ravel(), alpha)])
        idx = lambda i, j: 1 + i * n_theta + (j % n_theta)
        I, J = np.meshgrid(np.arange(n_rho), np.arange(n_theta), indexing="ij")
        I, J = I.ravel(), J.ravel()
        spokes = np.arange(n_theta)
        edges = [np.column_stack([np.zeros_like(spokes), idx(0, spokes)]),  # apex spokes
                 np.column_stack([idx(I, J), idx(I, J + 1)])]  # rings
        inner = I < n_rho - 1
        a, b = I[inner], J[inner]
        edges += [np.column_stack([idx(a, b), idx(a + 1, b)]),  # generators
                  np.column_stack([idx(a, b), idx(a + 1, b + 1)])]  # diagonals
        E = np.vstack(edges)
        w = np.linalg.norm(self.points[E[:, 0]] - self.points[E[:, 1]], axis=1)
        n = len(self.points)
        self.graph = coo_matrix((np.r_[w, w], (np.r_[E[:, 0], E[:, 1]], np.r_[E[:, 1], E[:, 0]])), shape=(n, n)).tocsr()
        self.triangles = 2 * n_theta * (n_rho - 1) + n_theta

    def vertex(self, rho, theta):
        if rho < 0.5 * self.rho[0]:
            return 0
        i = int(np.argmin(np.abs(self.rho - rho)))
        j = int(np.round(theta / (2 * np.pi / self.n_theta))) % self.n_theta
        return 1 + i * self.n_theta + j

    def graph_path(self, src, dst):
        dist, pred = dijkstra(self.graph, indices=src, return_predecessors=True)
        path = [dst]
        while path[-1] != src:
            path.append(pred[path[-1]])
        return float(dist[dst]), path[::-1]

    def coords(self, v):
        if v == 0:
            return 0.0, 0.0
        i, j = divmod(v - 1, self.n_theta)
        return float(self.rho[i]), float(self.theta[j])


def _straighten(rho, theta, alpha):
    """Shorten a polyline on the smooth surface with fixed endpoints (L-BFGS-B)."""
    n = len(rho)
    q = np.sqrt(1 + alpha**2)

    def length(z):
        rr = np.r_[rho[0], z[: n - 2], rho[-1]]
        tt = np.r_[theta[0], z[n - 2 :], theta[-1]]
        P = _embed(rr, tt, alpha)
        D = np.diff(P, axis=0)
        L = np.linalg.norm(D, axis=1)
        U = D / np.maximum(L, 1e-300)[:, None]
        G = np.zeros_like(P)
        G[:-1] -= U
        G[1:] += U
        dP_dr = np.stack([np.cos(tt) / q, np.sin(tt) / q, np.full_like(tt, alpha / q)], axis=1)
        dP_dt = np.stack([-rr * np.sin(tt) / q, rr * np.cos(tt) / q, np.zeros_like(tt)], axis=1)
        gr = np.sum(G * dP_dr, axis=1)[1:-1]
        gt = np.sum(G * dP_dt, axis=1)[1:-1]
        return L.sum(), np.r_[gr, gt]

    z0 = np.r_[rho[1:-1], theta[1:-1]]
    bounds = [(0, None)] * (n - 2) + [(None, None)] * (n - 2)
    res = minimize(length, z0, jac=True, method="L-BFGS-B", bounds=bounds,
                   options={"maxiter": 5000, "ftol": 1e-15, "gtol": 1e-12})
    return float(res.fun)


def mesh_geodesic_distance(a: ConeDirection, b: ConeDirection, mesh: ConeMesh | None = None,
                           nodes: int = 96) -> float:
    """Intrinsic distance from a graph search on a triangulated cone, then path straightening.

    The graph path fixes the route around the apex; it is resampled to ``nodes``
    points, which are moved on the smooth surface to minimise length. The apex
    route l1 + l2 is also admissible, and the axial part is combined as in a
    product metric.
    """
    _same_alpha(a, b)
    q = math.sqrt(1 + a.alpha**2)
    l1, l2 = a.r * q, b.r * q
    if mesh is None:
        mesh = ConeMesh(a.alpha, 1.05 * max(l1, l2, 1e-9))
    ta, tb = a.theta, b.theta
    _, path = mesh.graph_path(mesh.vertex(l1, ta), mesh.vertex(l2, tb))
    C = np.array([mesh.coords(v) for v in path])
    # unwrap theta along the path and pin the endpoints exactly
    th = C[:, 1].copy()
    for i in range(1, len(th)):
        if C[i, 0] == 0.0:
            th[i] = th[i - 1]
        else:
            th[i] = th[i - 1] + (th[i] - th[i - 1] + np.pi) % (2 * np.pi) - np.pi
    if C[0, 0] == 0.0 and len(th) > 1:
        th[0] = th[1]
    start = ta + np.round((th[0] - ta) / (2 * np.pi)) * 2 * np.pi
    end = tb + np.round((th[-1] - tb) / (2 * np.pi)) * 2 * np.pi
    P = _embed(C[:, 0], th, a.alpha)
    s = np.r_[0, np.cumsum(np.linalg.norm(np.diff(P, axis=0), axis=1))]
    u = np.linspace(0, s[-1], nodes) if s[-1] > 0 else np.zeros(nodes)
    rho = np.interp(u, s, C[:, 0])
    theta = np.interp(u, s, th)
    rho[0], rho[-1], theta[0], theta[-1] = l1, l2, start, end
    cone = min(_straighten(rho, theta, a.alpha), l1 + l2)
    return math.hypot(cone, a.s - b.s)
