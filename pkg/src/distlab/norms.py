"""Ambient norms in dimension 2 or 3: evaluation, derivative, unit-sphere sampling.

Three kinds are supported: ``euclid``, ``lp`` (p >= 2 recommended) and
``table`` (values and gradients sampled on the Euclidean unit sphere and
interpolated linearly between samples).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

_ZERO = 1e-300


class NormError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Norm:
    """A symmetric norm on R^dim.

    ``directions``, ``values`` and ``gradients`` are only used by tabulated
    norms: ``values[i]`` is the norm of the Euclidean-unit vector
    ``directions[i]`` and ``gradients[i]`` its derivative there.
    """

    kind: str
    dim: int
    p: float = 2.0
    directions: np.ndarray | None = field(default=None, repr=False)
    values: np.ndarray | None = field(default=None, repr=False)
    gradients: np.ndarray | None = field(default=None, repr=False)
    source: str | None = None

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise NormError(f"dimension must be 2 or 3, got {self.dim}")
        if self.kind not in ("euclid", "lp", "table"):
            raise NormError(f"unknown norm kind {self.kind!r}")
        if self.kind == "lp":
            if not (self.p >= 1.0 and math.isfinite(self.p)):
                raise NormError(f"lp exponent must be finite and >= 1, got {self.p}")
            if self.p < 2.0:
                warnings.warn(
                    f"lp:{self.p} has a non-Lipschitz derivative on the unit sphere; "
                    "structure guarantees do not apply",
                    stacklevel=3,
                )
        if self.kind == "table":
            _prepare_table(self)

    @classmethod
    def euclid(cls, dim: int = 2) -> "Norm":
        return cls("euclid", dim)

    @classmethod
    def lp(cls, p: float, dim: int = 2) -> "Norm":
        return cls("lp", dim, p=float(p))

    @classmethod
    def table(cls, directions, values, gradients, source=None) -> "Norm":
        directions = np.asarray(directions, dtype=float)
        return cls(
            "table",
            directions.shape[1],
            directions=directions,
            values=np.asarray(values, dtype=float),
            gradients=np.asarray(gradients, dtype=float),
            source=source,
        )

    @property
    def is_euclidean(self) -> bool:
        return self.kind == "euclid" or (self.kind == "lp" and self.p == 2.0)

    def spec(self) -> str:
        if self.kind == "euclid":
            return "euclid"
        if self.kind == "lp":
            return f"lp:{self.p:g}"
        return f"table:{self.source}" if self.source else "table"

    def with_dim(self, dim: int) -> "Norm":
        if dim == self.dim:
            return self
        if self.kind == "table":
            raise NormError("a tabulated norm has a fixed dimension")
        return Norm(self.kind, dim, p=self.p)

    def __call__(self, v):
        return norm_eval(self, v)

    def table_residual(self) -> float:
        """Largest Euler-identity residual |<g(u), u> - N(u)| of the raw table."""
        if self.kind != "table":
            return 0.0
        return float(np.max(np.abs(np.sum(self.gradients * self.directions, axis=1) - self.values)))


def _prepare_table(norm: Norm) -> None:
    d, v, g = norm.directions, norm.values, norm.gradients
    if d is None or v is None or g is None:
        raise NormError("tabulated norm needs directions, values and gradients")
    if d.ndim != 2 or d.shape[1] != norm.dim or v.shape != (len(d),) or g.shape != d.shape:
        raise NormError("tabulated norm arrays have inconsistent shapes")
    if not (np.all(np.isfinite(d)) and np.all(np.isfinite(v)) and np.all(np.isfinite(g))):
        raise NormError("tabulated norm contains non-finite entries")
    if np.any(v <= 0):
        raise NormError("tabulated norm values must be positive")
    d = d / np.linalg.norm(d, axis=1, keepdims=True)
    if norm.dim == 2:
        order = np.argsort(np.arctan2(d[:, 1], d[:, 0]))
        d, v, g = d[order], v[order], g[order]
        if len(d) < 3:
            raise NormError("a 2-D table needs at least 3 directions")
        object.__setattr__(norm, "_angles", np.arctan2(d[:, 1], d[:, 0]))
    else:
        from scipy.spatial import ConvexHull

        if len(d) < 4:
            raise NormError("a 3-D table needs at least 4 directions")
        hull = ConvexHull(d)
        eq = hull.equations  # n.x + c <= 0 inside
        object.__setattr__(norm, "_simplices", hull.simplices)
        object.__setattr__(norm, "_planes", eq[:, :3] / (-eq[:, 3:4]))
    object.__setattr__(norm, "directions", d)
    object.__setattr__(norm, "values", v)
    object.__setattr__(norm, "gradients", g)


def parse_norm(spec: str, dim: int = 2) -> Norm:
    """Parse a CLI norm string: ``euclid``, ``lp:<p>`` or ``table:<path>``."""
    spec = spec.strip()
    if spec == "euclid":
        return Norm.euclid(dim)
    if spec.startswith("lp:"):
        try:
            p = float(spec[3:])
        except ValueError:
            raise NormError(f"bad lp exponent in {spec!r}") from None
        return Norm.lp(p, dim)
    if spec.startswith("table:"):
        path = spec[6:]
        with open(path) as fh:
            doc = json.load(fh)
        return Norm.table(doc["directions"], doc["values"], doc["gradients"], source=path)
    raise NormError(f"unknown norm spec {spec!r}")


def _as_vectors(norm: Norm, v):
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != norm.dim:
        raise NormError(f"dimension mismatch: vector of length {v.shape[-1]}, norm of dimension {norm.dim}")
    return v


def _table_weights(norm: Norm, u):
    """Interpolation indices and weights for Euclidean-unit directions u (..., dim)."""
    flat = u.reshape(-1, norm.dim)
    if norm.dim == 2:
        ang = norm._angles
        a = np.arctan2(flat[:, 1], flat[:, 0])
        n = len(ang)
        hi = np.searchsorted(ang, a) % n
        lo = (hi - 1) % n
        span = (ang[hi] - ang[lo]) % (2 * np.pi)
        span = np.where(span == 0, 2 * np.pi, span)
        w = ((a - ang[lo]) % (2 * np.pi)) / span
        idx = np.stack([lo, hi], axis=1)
        wts = np.stack([1 - w, w], axis=1)
    else:
        planes = norm._planes
        score = flat @ planes.T
        face = np.argmax(score, axis=1)
        tri = norm._simplices[face]
        verts = norm.directions[tri]  # (M, 3, 3)
        hit = flat / score[np.arange(len(flat)), face][:, None]
        wts = np.linalg.solve(np.transpose(verts, (0, 2, 1)), hit[:, :, None])[:, :, 0]
        idx = tri
    return idx.reshape(u.shape[:-1] + (-1,)), wts.reshape(u.shape[:-1] + (-1,))


def norm_eval(norm: Norm, v):
    """Return ||v|| for a vector or an array of vectors along the last axis."""
    v = _as_vectors(norm, v)
    if norm.kind == "euclid":
        out = np.sqrt(np.sum(v * v, axis=-1))
    elif norm.kind == "lp":
        a = np.abs(v)
        scale = np.max(a, axis=-1)
        safe = np.where(scale > 0, scale, 1.0)
        out = scale * np.sum((a / safe[..., None]) ** norm.p, axis=-1) ** (1.0 / norm.p)
    else:
        r = np.sqrt(np.sum(v * v, axis=-1))
        safe = np.where(r > 0, r, 1.0)
        idx, w = _table_weights(norm, v / safe[..., None])
        out = r * np.sum(norm.values[idx] * w, axis=-1)
    return float(out) if out.ndim == 0 else out


def norm_gradient(norm: Norm, v):
    """Derivative of the norm at v != 0 (0-homogeneous, satisfies <grad, v> = ||v||)."""
    v = _as_vectors(norm, v)
    n = np.asarray(norm_eval(norm, v))
    if np.any(n == 0):
        raise NormError("the norm is not differentiable at the origin")
    if norm.kind == "euclid":
        return v / n[..., None]
    if norm.kind == "lp":
        p = norm.p
        a = np.abs(v)
        a = np.where(a < _ZERO, 0.0, a)
        return np.sign(v) * (a / n[..., None]) ** (p - 1)
    r = np.sqrt(np.sum(v * v, axis=-1))
    u = v / r[..., None]
    idx, w = _table_weights(norm, u)
    g = np.sum(norm.gradients[idx] * w[..., None], axis=-2)
    val = n / r
    # enforce the Euler identity along the radial direction
    g = g + (val - np.sum(g * u, axis=-1))[..., None] * u
    return g


def sample_unit_sphere(norm: Norm, count: int, seed: int = 0) -> np.ndarray:
    """Return ``count`` norm-unit directions, deterministic for a fixed seed.

    2-D samples are equiangular with a seeded phase; 3-D samples follow a
    Fibonacci lattice under a seeded rotation. Euclidean samples are
    radially rescaled onto the unit sphere of ``norm``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    if norm.dim == 2:
        phase = rng.uniform(0.0, 2 * np.pi / count)
        t = phase + 2 * np.pi * np.arange(count) / count
        u = np.stack([np.cos(t), np.sin(t)], axis=1)
    else:
        k = np.arange(count) + 0.5
        z = 1.0 - 2.0 * k / count
        rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        phi = np.pi * (3.0 - math.sqrt(5.0)) * k
        u = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
        q, r = np.linalg.qr(rng.normal(size=(3, 3)))
        q = q * np.sign(np.diag(r))
        u = u @ q.T
    return u / np.asarray(norm_eval(norm, u)).reshape(-1, 1)
