"""Piecewise-affine DC functions: f = max(plus pieces) - max(minus pieces)."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .critical import HausdorffEstimate, dedup_sorted, hausdorff_box_estimate

PIECE_CAP = 10_000
GRAD_TOL = 1e-12


class PieceOverflow(OverflowError):
    pass


@dataclass(frozen=True, eq=False)
class PolyConvex:
    """max_i (<G[i], x> + b[i]), with duplicate pieces removed."""

    G: np.ndarray  # (k, dim)
    b: np.ndarray  # (k,)

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if len(G) == 0 or len(G) != len(b):
            raise ValueError("a convex part needs at least one affine piece")
        rows = np.unique(np.column_stack([G, b]), axis=0)
        if len(rows) > PIECE_CAP:
            raise PieceOverflow(f"{len(rows)} pieces exceed the cap of {PIECE_CAP}")
        object.__setattr__(self, "G", rows[:, :-1])
        object.__setattr__(self, "b", rows[:, -1])

    @classmethod
    def affine(cls, grad, offset=0.0):
        return cls(np.atleast_2d(grad), [offset])

    @property
    def dim(self):
        return self.G.shape[1]

    def __call__(self, x):
        """Value at one point (shape (dim,)) or many (shape (..., dim))."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.dim:
            raise ValueError(f"points must have a last axis of length {self.dim}")
        out = (x.reshape(-1, self.dim) @ self.G.T + self.b).max(axis=1)
        return float(out[0]) if x.ndim == 1 else out.reshape(x.shape[:-1])

    def active(self, x):
        """Index of the (first) maximal piece at a point."""
        x = np.asarray(x, dtype=float).reshape(self.dim)
        return int(np.argmax(self.G @ x + self.b))

    def scale(self, c: float) -> "PolyConvex":
        if c < 0:
            raise ValueError("only nonnegative multiples of a convex part stay convex")
        return PolyConvex(c * self.G, c * self.b)

    def shift(self, c: float) -> "PolyConvex":
        return PolyConvex(self.G, self.b + c)

    def pruned(self) -> "PolyConvex":
        """Drop pieces that are never strictly maximal (upper hull of (G, b))."""
        pts = np.column_stack([self.G, self.b])
        if len(pts) <= self.dim + 1:
            return self
        if self.dim == 1:
            order = np.lexsort((pts[:, 1], pts[:, 0]))
            hull = []
            for p in pts[order]:
                # keep only the highest offset per slope
                if hull and hull[-1][0] == p[0]:
                    hull.pop()
                while len(hull) >= 2:
                    (x1, y1), (x2, y2) = hull[-2], hull[-1]
                    if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) >= 0:
                        hull.pop()
                    else:
                        break
                hull.append(tuple(p))
            h = np.array(hull)
            return PolyConvex(h[:, :1], h[:, 1])
        from scipy.spatial import ConvexHull, QhullError

        try:
            hull = ConvexHull(pts)
        except QhullError:
            return self
        upper = hull.equations[:, -2] > 1e-12  # facet normal points to larger b
        keep = np.unique(hull.simplices[upper])
        return PolyConvex(pts[keep, :-1], pts[keep, -1]) if len(keep) else self

    def breakpoints(self):
        """Kinks of a 1-D part, increasing."""
        if self.dim != 1:
            raise ValueError("breakpoints are defined in dimension 1")
        p = self.pruned()
        order = np.argsort(p.G[:, 0])
        g, b = p.G[order, 0], p.b[order]
        return (b[:-1] - b[1:]) / (g[1:] - g[:-1])


def max_of(a: PolyConvex, b: PolyConvex) -> PolyConvex:
    return PolyConvex(np.vstack([a.G, b.G]), np.concatenate([a.b, b.b])).pruned()


def sum_of(a: PolyConvex, b: PolyConvex) -> PolyConvex:
    if len(a.b) * len(b.b) > PIECE_CAP:
        raise PieceOverflow(f"sum would create {len(a.b) * len(b.b)} pieces (cap {PIECE_CAP})")
    G = (a.G[:, None, :] + b.G[None, :, :]).reshape(-1, a.dim)
    c = (a.b[:, None] + b.b[None, :]).ravel()
    return PolyConvex(G, c).pruned()


@dataclass(frozen=True, eq=False)
class DCFunction:
    plus: PolyConvex
    minus: PolyConvex

    def __post_init__(self):
        if self.plus.dim != self.minus.dim or self.plus.dim not in (1, 2):
            raise ValueError("plus and minus parts must share dimension 1 or 2")

    @property
    def dim(self):
        return self.plus.dim

    def __call__(self, x):
        return dc_eval(self, x)

    @classmethod
    def from_dict(cls, doc) -> "DCFunction":
        dim = int(doc["dim"])

        def part(rows):
            rows = np.asarray(rows, dtype=float)
            if rows.ndim != 2 or rows.shape[1] != dim + 1:
                raise ValueError(f"each piece must have {dim} gradient entries and an offset")
            return PolyConvex(rows[:, :dim], rows[:, dim])

        return cls(part(doc["plus"]), part(doc["minus"]))

    def to_dict(self):
        return {
            "dim": self.dim,
            "plus": np.column_stack([self.plus.G, self.plus.b]).tolist(),
            "minus": np.column_stack([self.minus.G, self.minus.b]).tolist(),
        }


def load_dc(path) -> DCFunction:
    with open(path) as fh:
        return DCFunction.from_dict(json.load(fh))


def dc_eval(f: DCFunction, x):
    """max(plus pieces at x) - max(minus pieces at x)."""
    p, m = f.plus(x), f.minus(x)
    return p - m


def dc_sum(f: DCFunction, g: DCFunction) -> DCFunction:
    if f.dim != g.dim:
        raise ValueError("dimension mismatch")
    return DCFunction(sum_of(f.plus, g.plus), sum_of(f.minus, g.minus))


def _scaled(f: DCFunction, c: float) -> DCFunction:
    if c >= 0:
        return DCFunction(f.plus.scale(c), f.minus.scale(c))
    return DCFunction(f.minus.scale(-c), f.plus.scale(-c))


def _constant(dim, c) -> DCFunction:
    z = np.zeros((1, dim))
    return DCFunction(PolyConvex(z, [c]), PolyConvex(z, [0.0]))


def abs_decomposition(outer: DCFunction):
    """Write a 1-D piecewise-affine G as a0 + b0 t + sum_j c_j |t - t_j|."""
    if outer.dim != 1:
        raise ValueError("the outer function must be one-dimensional")
    knots = np.unique(np.concatenate([outer.plus.breakpoints(), outer.minus.breakpoints()]))
    if len(knots) > PIECE_CAP:
        raise PieceOverflow("too many breakpoints in the outer function")
    # slopes on each side of every knot
    def slope(t):
        P, M = outer.plus, outer.minus
        return P.G[P.active([t]), 0] - M.G[M.active([t]), 0]

    if len(knots) == 0:
        s = slope(0.0)
        return float(dc_eval(outer, [0.0])), float(s), knots, np.zeros(0)
    mids = np.concatenate([[knots[0] - 1.0], 0.5 * (knots[:-1] + knots[1:]), [knots[-1] + 1.0]])
    slopes = np.array([slope(t) for t in mids])
    c = 0.5 * np.diff(slopes)
    b0 = 0.5 * (slopes[0] + slopes[-1])
    a0 = float(dc_eval(outer, [0.0])) - b0 * 0.0 - float(np.sum(c * np.abs(knots)))
    return a0, float(b0), knots, c


def dc_compose_pa(outer: DCFunction, inner: DCFunction) -> DCFunction:
    """Exact DC representation of outer(inner(x)) for a 1-D piecewise-affine outer.

    Uses |P - M - t| = 2 max(P, M + t) - P - M - t for the inner parts P, M.
    """
    a0, b0, knots, c = abs_decomposition(outer)
    P, M = inner.plus, inner.minus
    result = dc_sum(_constant(inner.dim, a0), _scaled(inner, b0))
    for tj, cj in zip(knots, c):
        if cj == 0:
            continue
        hinge = max_of(P, M.shift(tj)).scale(2 * abs(cj))
        rest = sum_of(P, M).shift(tj).scale(abs(cj))
        term = DCFunction(hinge, rest) if cj > 0 else DCFunction(rest, hinge)
        result = dc_sum(result, term)
    return result


# --- stationary cells --------------------------------------------------------

def _clip(poly: np.ndarray, a: np.ndarray, c: float) -> np.ndarray:
    """Clip a convex polygon to {x : <a, x> <= c}."""
    if len(poly) == 0:
        return poly
    out = []
    n = len(poly)
    vals = poly @ a - c
    for k in range(n):
        p, q = poly[k], poly[(k + 1) % n]
        vp, vq = vals[k], vals[(k + 1) % n]
        if vp <= 0:
            out.append(p)
        if (vp < 0 < vq) or (vq < 0 < vp):
            out.append(p + (q - p) * (vp / (vp - vq)))
    return np.array(out).reshape(-1, 2)


def _area(poly):
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


@dataclass
class StationaryCell:
    cell: np.ndarray  # (lo, hi) in 1-D, polygon vertices in 2-D
    value: float


def _region(part: PolyConvex, i: int, poly: np.ndarray) -> np.ndarray:
    for k in range(len(part.b)):
        if k != i:
            # piece k <= piece i
            poly = _clip(poly, part.G[k] - part.G[i], part.b[i] - part.b[k])
            if len(poly) == 0:
                break
    return poly


def stationary_set(f: DCFunction, box) -> list:
    """Open cells of the box on which the gradient of f vanishes identically."""
    P, M = f.plus.pruned(), f.minus.pruned()
    if f.dim == 1:
        lo, hi = float(box[0]), float(box[1])
        knots = np.concatenate([P.breakpoints(), M.breakpoints()])
        edges = np.unique(np.concatenate([[lo, hi], knots[(knots > lo) & (knots < hi)]]))
        cells = []
        for a, b in zip(edges[:-1], edges[1:]):
            m = 0.5 * (a + b)
            g = P.G[P.active([m]), 0] - M.G[M.active([m]), 0]
            if abs(g) <= GRAD_TOL:
                cells.append(StationaryCell(np.array([a, b]), float(dc_eval(f, [m]))))
        return cells
    (x0, x1), (y0, y1) = box
    square = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)
    if len(P.b) * len(M.b) > PIECE_CAP:
        raise PieceOverflow("cell arrangement exceeds the cap")
    cells = []
    for i in range(len(P.b)):
        Ri = _region(P, i, square)
        if _area(Ri) <= 0:
            continue
        for j in range(len(M.b)):
            if np.max(np.abs(P.G[i] - M.G[j])) > GRAD_TOL:
                continue
            Rij = _region(M, j, Ri)
            if _area(Rij) > 0:
                c = Rij.mean(axis=0)
                cells.append(StationaryCell(Rij, float(dc_eval(f, c))))
    return cells


@dataclass
class SardReport:
    values: np.ndarray
    cells: int
    estimate: HausdorffEstimate


def morse_sard_check(f: DCFunction, box, delta: float, s=None) -> SardReport:
    """Stationary values of f on the box and their s-premeasure at scale delta."""
    s = f.dim / 2 if s is None else s
    cells = stationary_set(f, box)
    values = dedup_sorted([c.value for c in cells])
    return SardReport(values, len(cells), hausdorff_box_estimate(values, s, delta))


def abs_1d(shift: float = 0.0, scale: float = 1.0) -> PolyConvex:
    """scale * |x - shift| as a convex part."""
    return PolyConvex([[scale], [-scale]], [-scale * shift, scale * shift])
