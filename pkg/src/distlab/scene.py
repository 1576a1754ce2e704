"""Compact closed sets built from primitives, and nearest-point queries."""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass

import numpy as np

from .norms import Norm, norm_eval

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SEGMENT_TOL = 1e-12


class SceneError(ValueError):
    """Invalid scene document; ``lineno`` points at the offending line when known."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno else message)


class OnSetQuery(ValueError):
    pass


@dataclass(frozen=True)
class Point:
    at: tuple

    def __post_init__(self):
        object.__setattr__(self, "at", tuple(float(c) for c in self.at))

    @property
    def dim(self):
        return len(self.at)

    def sample(self, step):
        return np.array([self.at], dtype=float)


@dataclass(frozen=True)
class Segment:
    a: tuple
    b: tuple

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(c) for c in self.a))
        object.__setattr__(self, "b", tuple(float(c) for c in self.b))

    @property
    def dim(self):
        return len(self.a)

    def sample(self, step):
        a, b = np.asarray(self.a, float), np.asarray(self.b, float)
        n = max(2, int(math.ceil(np.linalg.norm(b - a) / step)) + 1)
        t = np.linspace(0.0, 1.0, n)[:, None]
        return a + t * (b - a)


@dataclass(frozen=True)
class PolylineLoop:
    points: tuple

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(tuple(float(c) for c in q) for q in self.points))

    @property
    def dim(self):
        return len(self.points[0])

    def segments(self):
        pts = self.points
        return [Segment(pts[i], pts[(i + 1) % len(pts)]) for i in range(len(pts))]

    def sample(self, step):
        return np.concatenate([s.sample(step) for s in self.segments()])


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return len(self.center)

    def sample(self, step):
        c = np.asarray(self.center, float)
        if self.dim == 2:
            g = np.arange(-self.radius, self.radius + step, step)
            xx, yy = np.meshgrid(g, g, indexing="ij")
            pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
            pts = pts[np.sum(pts**2, axis=1) <= self.radius**2]
            n = max(8, int(2 * np.pi * self.radius / step))
            t = 2 * np.pi * np.arange(n) / n
            rim = self.radius * np.stack([np.cos(t), np.sin(t)], axis=1)
            return c + np.concatenate([pts, rim])
        raise NotImplementedError("dense sampling of 3-D balls is not provided")


class ClosedSet:
    """Nonempty finite union of points, segments, closed polylines and balls."""

    def __init__(self, primitives):
        prims = []
        for p in primitives:
            prims.extend(p.segments() if isinstance(p, PolylineLoop) else [p])
        if not prims:
            raise SceneError("a closed set needs at least one primitive")
        dims = {p.dim for p in prims}
        if len(dims) != 1 or dims.pop() not in (2, 3):
            raise SceneError("all primitives must share dimension 2 or 3")
        self.source = list(primitives)
        self.primitives = prims
        self.dim = prims[0].dim
        for p in prims:
            if isinstance(p, Ball) and not p.radius > 0:
                raise SceneError("ball radius must be positive")

    def __repr__(self):
        return f"ClosedSet(dim={self.dim}, primitives={len(self.primitives)})"

    @classmethod
    def points(cls, pts):
        return cls([Point(tuple(map(float, p))) for p in pts])

    def bbox(self):
        lo = np.full(self.dim, np.inf)
        hi = np.full(self.dim, -np.inf)
        for p in self.primitives:
            if isinstance(p, Point):
                pts = np.array([p.at])
            elif isinstance(p, Segment):
                pts = np.array([p.a, p.b])
            else:
                c = np.asarray(p.center)
                pts = np.array([c - p.radius, c + p.radius])
            lo = np.minimum(lo, pts.min(axis=0))
            hi = np.maximum(hi, pts.max(axis=0))
        return lo, hi

    def to_dict(self):
        out = []
        for p in self.source:
            if isinstance(p, Point):
                out.append({"type": "point", "at": list(p.at)})
            elif isinstance(p, Segment):
                out.append({"type": "segment", "a": list(p.a), "b": list(p.b)})
            elif isinstance(p, PolylineLoop):
                out.append({"type": "loop", "points": [list(q) for q in p.points]})
            else:
                out.append({"type": "ball", "center": list(p.center), "radius": p.radius})
        return {"dim": self.dim, "primitives": out}

    def hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), default=float)
        return hashlib.sha256(text.encode()).hexdigest()


# --- loading -----------------------------------------------------------------

_KEYS = {"point": ("at",), "segment": ("a", "b"), "loop": ("points",), "ball": ("center", "radius")}


def _reject_constant(name):
    raise SceneError(f"non-finite number {name} is not allowed")


def parse_scene(text: str) -> ClosedSet:
    """Parse a scene JSON document, raising SceneError with a line number."""
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise SceneError(exc.msg, exc.lineno) from None
    type_lines = [text.count("\n", 0, m.start()) + 1 for m in re.finditer(r'"type"\s*:', text)]

    def line_of(i):
        return type_lines[i] if i < len(type_lines) else None

    if not isinstance(doc, dict) or "dim" not in doc or "primitives" not in doc:
        raise SceneError('scene must be an object with "dim" and "primitives"', 1)
    dim = doc["dim"]
    if dim not in (2, 3):
        raise SceneError(f"dim must be 2 or 3, got {dim!r}", 1)
    prims = doc["primitives"]
    if not isinstance(prims, list) or not prims:
        raise SceneError('"primitives" must be a nonempty list', 1)

    def vec(value, i, what):
        if not (isinstance(value, list) and len(value) == dim):
            raise SceneError(f"primitive {i}: {what} must be a list of {dim} numbers", line_of(i))
        out = []
        for c in value:
            if isinstance(c, bool) or not isinstance(c, (int, float)) or not math.isfinite(c):
                raise SceneError(f"primitive {i}: {what} has a non-finite or non-numeric entry", line_of(i))
            out.append(float(c))
        return tuple(out)

    parsed = []
    for i, p in enumerate(prims):
        if not isinstance(p, dict) or p.get("type") not in _KEYS:
            raise SceneError(f"primitive {i}: unknown or missing type", line_of(i))
        kind = p["type"]
        missing = [k for k in _KEYS[kind] if k not in p]
        if missing:
            raise SceneError(f"primitive {i}: missing key(s) {', '.join(missing)}", line_of(i))
        if kind == "point":
            parsed.append(Point(vec(p["at"], i, "at")))
        elif kind == "segment":
            parsed.append(Segment(vec(p["a"], i, "a"), vec(p["b"], i, "b")))
        elif kind == "loop":
            pts = p["points"]
            if not isinstance(pts, list) or len(pts) < 2:
                raise SceneError(f"primitive {i}: a loop needs at least 2 points", line_of(i))
            parsed.append(PolylineLoop(tuple(vec(q, i, "points") for q in pts)))
        else:
            r = p["radius"]
            if isinstance(r, bool) or not isinstance(r, (int, float)) or not math.isfinite(r) or r <= 0:
                raise SceneError(f"primitive {i}: radius must be a positive finite number", line_of(i))
            parsed.append(Ball(vec(p["center"], i, "center"), float(r)))
    return ClosedSet(parsed)


def load_scene(path) -> ClosedSet:
    with open(path) as fh:
        return parse_scene(fh.read())


# --- per-primitive nearest points -------------------------------------------

def _golden_min(fun, lo, hi, tol):
    """Vectorised golden-section minimisation of unimodal fun over [lo, hi]."""
    a, b = np.array(lo, dtype=float), np.array(hi, dtype=float)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    while np.max(b - a) > tol:
        left = fc <= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new = np.where(left, b - GOLDEN * (b - a), a + GOLDEN * (b - a))
        fnew = fun(new)
        c, d, fc, fd = (
            np.where(left, new, d),
            np.where(left, c, new),
            np.where(left, fnew, fd),
            np.where(left, fc, fnew),
        )
    t = 0.5 * (a + b)
    return t


def _segment_nearest(seg, X, norm):
    a, b = np.asarray(seg.a, float), np.asarray(seg.b, float)
    ab = b - a
    if norm.is_euclidean:
        den = ab @ ab
        t = np.zeros(len(X)) if den == 0 else np.clip((X - a) @ ab / den, 0.0, 1.0)
    else:
        def f(t):
            return norm_eval(norm, a + t[:, None] * ab - X)

        t = _golden_min(f, np.zeros(len(X)), np.ones(len(X)), SEGMENT_TOL)
        # endpoints can beat the interior estimate by rounding
        for end in (0.0, 1.0):
            te = np.full(len(X), end)
            t = np.where(f(te) < f(t), te, t)
    P = a + t[:, None] * ab
    return np.asarray(norm_eval(norm, P - X)), P


def _ball_nearest(ball, X, norm):
    c = np.asarray(ball.center, float)
    R = ball.radius
    off = X - c
    r = np.sqrt(np.sum(off * off, axis=1))
    inside = r <= R
    if norm.is_euclidean:
        safe = np.where(r > 0, r, 1.0)
        P = np.where(inside[:, None], X, c + off * (R / safe)[:, None])
        return np.maximum(r - R, 0.0), P
    if ball.dim != 2:
        raise NotImplementedError("exact non-Euclidean projection onto 3-D balls is not supported")
    n = 64
    th = 2 * np.pi * np.arange(n) / n
    rim = c + R * np.stack([np.cos(th), np.sin(th)], axis=1)
    coarse = norm_eval(norm, rim[None, :, :] - X[:, None, :])
    best = th[np.argmin(coarse, axis=1)]
    step = 2 * np.pi / n

    def f(t):
        pts = c + R * np.stack([np.cos(t), np.sin(t)], axis=1)
        return norm_eval(norm, pts - X)

    t = _golden_min(f, best - step, best + step, SEGMENT_TOL)
    P = c + R * np.stack([np.cos(t), np.sin(t)], axis=1)
    dist = np.asarray(f(t))
    P = np.where(inside[:, None], X, P)
    return np.where(inside, 0.0, dist), P


def primitive_nearest(prim, X, norm):
    """Distances (N,) and nearest points (N, dim) from X to one primitive."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if isinstance(prim, Point):
        p = np.asarray(prim.at, float)
        return np.asarray(norm_eval(norm, X - p)).reshape(-1), np.broadcast_to(p, X.shape).copy()
    if isinstance(prim, Segment):
        return _segment_nearest(prim, X, norm)
    if isinstance(prim, Ball):
        return _ball_nearest(prim, X, norm)
    raise TypeError(f"unknown primitive {prim!r}")


def nearest_table(F: ClosedSet, X, norm: Norm):
    """Per-primitive distances (N, K) and nearest points (N, K, dim)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != F.dim or norm.dim != F.dim:
        raise ValueError("dimension mismatch between scene, norm and query")
    # points are handled in one batch; they dominate typical scenes
    pt_idx = [i for i, p in enumerate(F.primitives) if isinstance(p, Point)]
    D = np.empty((len(X), len(F.primitives)))
    P = np.empty((len(X), len(F.primitives), F.dim))
    if pt_idx:
        pts = np.array([F.primitives[i].at for i in pt_idx])
        D[:, pt_idx] = norm_eval(norm, X[:, None, :] - pts[None, :, :])
        P[:, pt_idx] = pts[None, :, :]
    for i, prim in enumerate(F.primitives):
        if i in pt_idx:
            continue
        D[:, i], P[:, i] = primitive_nearest(prim, X, norm)
    return D, P


def distance(F: ClosedSet, x, norm: Norm):
    """dist(x, F) under ``norm``; scalar for one point, array for (N, dim)."""
    x = np.asarray(x, dtype=float)
    D, _ = nearest_table(F, x, norm)
    d = D.min(axis=1)
    return float(d[0]) if x.ndim == 1 else d


@dataclass
class NearestSet:
    query: np.ndarray
    distance: float
    witnesses: np.ndarray
    directions: np.ndarray
    tolerance: float


def nearest_points(F: ClosedSet, x, norm: Norm, tau: float = 1e-9) -> NearestSet:
    """All near-minimising points of F seen from x, merged at resolution tau."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    x = np.asarray(x, dtype=float)
    D, P = nearest_table(F, x, norm)
    D, P = D[0], P[0]
    dmin = D.min()
    if dmin <= tau:
        raise OnSetQuery(f"query at distance {dmin:g} <= tau from the set")
    cand = np.flatnonzero(D <= dmin + tau)
    cand = cand[np.argsort(D[cand], kind="stable")]
    clusters = []
    for i in cand:
        for cl in clusters:
            if np.linalg.norm(P[i] - P[cl[0]]) <= tau:
                cl.append(i)
                break
        else:
            clusters.append([i])
    witnesses = []
    for cl in clusters:
        if len(cl) == 1:
            witnesses.append(P[cl[0]])
            continue
        centroid = P[cl].mean(axis=0)
        _, back = primitive_nearest(F.primitives[cl[0]], centroid[None, :], Norm.euclid(F.dim))
        witnesses.append(back[0])
    W = np.array(witnesses)
    dists = np.asarray(norm_eval(norm, W - x)).reshape(-1)
    U = (W - x) / dists[:, None]
    return NearestSet(x, float(dmin), W, U, float(tau))
