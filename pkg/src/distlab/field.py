"""Distance functions sampled on uniform grids."""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .norms import Norm, parse_norm
from .scene import ClosedSet, distance, parse_scene

DEFAULT_MEM_CAP_MB = 2048
NONSMOOTH_GAP = 0.2
CHUNK = 65536


class MemoryCapExceeded(MemoryError):
    pass


class OutOfBounds(ValueError):
    pass


def mem_cap_bytes() -> int:
    return int(float(os.environ.get("DISTLAB_MEM_CAP_MB", DEFAULT_MEM_CAP_MB)) * 2**20)


@dataclass(frozen=True)
class GridSpec:
    origin: tuple
    h: float
    dims: tuple

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        if len(self.origin) != len(self.dims) or len(self.dims) not in (2, 3):
            raise ValueError("grid must be 2-D or 3-D with matching origin")
        if min(self.dims) < 2:
            raise ValueError("every axis needs at least 2 vertices")
        # values plus one coordinate array per axis during sampling
        need = self.size * 8 * (1 + self.dim)
        if need > mem_cap_bytes():
            raise MemoryCapExceeded(
                f"grid of {self.size} vertices needs ~{need / 2**20:.0f} MiB, "
                f"cap is {mem_cap_bytes() / 2**20:.0f} MiB (DISTLAB_MEM_CAP_MB)"
            )

    @classmethod
    def from_bbox(cls, lo, hi, res: int) -> "GridSpec":
        """Grid on [lo, hi] with ``res`` vertices along the longest axis."""
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        if np.any(hi <= lo):
            raise ValueError("bounding box must have positive extent")
        if res < 2:
            raise ValueError("resolution must be at least 2")
        h = float(np.max(hi - lo)) / (res - 1)
        dims = tuple(int(np.floor(e / h + 1e-9)) + 1 for e in (hi - lo))
        return cls(tuple(lo), h, dims)

    @property
    def dim(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.origin) + self.h * (np.asarray(self.dims) - 1)

    def axes(self):
        return [o + self.h * np.arange(n) for o, n in zip(self.origin, self.dims)]

    def vertices(self, flat_index=None) -> np.ndarray:
        """Coordinates of vertices (all, or the given row-major flat indices)."""
        if flat_index is None:
            flat_index = np.arange(self.size)
        idx = np.stack(np.unravel_index(flat_index, self.dims), axis=1)
        return np.asarray(self.origin) + self.h * idx

    def to_dict(self):
        return {"origin": list(self.origin), "h": self.h, "dims": list(self.dims)}


@dataclass(frozen=True, eq=False)
class DistanceField:
    grid: GridSpec
    values: np.ndarray
    norm: Norm
    scene: ClosedSet

    @property
    def h(self):
        return self.grid.h

    def points(self):
        return self.grid.vertices().reshape(self.grid.dims + (self.grid.dim,))

    def lipschitz_violation(self) -> float:
        """Largest excess of a neighbour difference over the edge length."""
        worst = 0.0
        for ax in range(self.grid.dim):
            e = np.zeros(self.grid.dim)
            e[ax] = self.grid.h
            step = float(self.norm(e))
            diff = np.abs(np.diff(self.values, axis=ax))
            worst = max(worst, float(np.max(diff - step, initial=-np.inf)))
        return worst


def sample_field(F: ClosedSet, norm: Norm, grid: GridSpec, threads: int = 1, chunk: int = CHUNK) -> DistanceField:
    """Evaluate dist(., F) at every grid vertex.

    Each chunk of vertices is evaluated exactly once and written into its own
    slice, so the result does not depend on the number of threads.
    """
    if F.dim != grid.dim or norm.dim != grid.dim:
        raise ValueError("dimension mismatch between scene, norm and grid")
    out = np.empty(grid.size)
    starts = range(0, grid.size, chunk)

    def work(s):
        e = min(s + chunk, grid.size)
        out[s:e] = distance(F, grid.vertices(np.arange(s, e)), norm)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, starts))
    else:
        for s in starts:
            work(s)
    values = out.reshape(grid.dims)
    values.setflags(write=False)
    return DistanceField(grid, values, norm, F)


def _cell_coords(field: DistanceField, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    g = field.grid
    rel = (x - np.asarray(g.origin)) / g.h
    top = np.asarray(g.dims) - 1
    tol = 1e-9
    if np.any(rel < -tol) or np.any(rel > top + tol):
        raise OutOfBounds("query outside the grid")
    rel = np.clip(rel, 0, top)
    base = np.minimum(np.floor(rel).astype(int), top - 1)
    return base, rel - base


def interpolate(field: DistanceField, x):
    """Multilinear interpolation of the sampled values; scalar for one point."""
    single = np.asarray(x).ndim == 1
    base, frac = _cell_coords(field, x)
    dim = field.grid.dim
    out = np.zeros(len(base))
    for corner in range(2**dim):
        bits = [(corner >> k) & 1 for k in range(dim)]
        w = np.ones(len(base))
        for k, b in enumerate(bits):
            w = w * (frac[:, k] if b else 1 - frac[:, k])
        idx = tuple(base[:, k] + bits[k] for k in range(dim))
        out += w * field.values[idx]
    return float(out[0]) if single else out


def interpolate_gradient(field: DistanceField, x):
    """Gradient of the multilinear interpolant at x (one-sided on cell faces)."""
    base, frac = _cell_coords(field, x)
    dim = field.grid.dim
    grad = np.zeros((len(base), dim))
    for corner in range(2**dim):
        bits = [(corner >> k) & 1 for k in range(dim)]
        val = field.values[tuple(base[:, k] + bits[k] for k in range(dim))]
        for a in range(dim):
            w = np.full(len(base), (1.0 if bits[a] else -1.0) / field.grid.h)
            for k, b in enumerate(bits):
                if k != a:
                    w = w * (frac[:, k] if b else 1 - frac[:, k])
            grad[:, a] += w * val
    return grad


@dataclass
class GradientProbe:
    gradient: np.ndarray
    nonsmooth: bool
    gap: float


def field_gradient(field: DistanceField, x, gap_threshold: float = NONSMOOTH_GAP) -> GradientProbe:
    """Central-difference gradient with step h plus a nondifferentiability flag."""
    x = np.asarray(x, dtype=float)
    g = field.grid
    h = g.h
    lo, hi = np.asarray(g.origin), g.upper
    if np.any(x - 2 * h < lo - 1e-9) or np.any(x + 2 * h > hi + 1e-9):
        raise OutOfBounds("gradient probe needs a 2h margin inside the grid")
    E = np.eye(g.dim) * h
    f0 = interpolate(field, x)
    fp = interpolate(field, x + E)
    fm = interpolate(field, x - E)
    fwd = (fp - f0) / h
    bwd = (f0 - fm) / h
    gap = float(np.max(np.abs(fwd - bwd)))
    return GradientProbe((fp - fm) / (2 * h), gap > gap_threshold, gap)


# --- dumps ---------------------------------------------------------------

def dump_field(field: DistanceField, path_bin: str, path_json: str | None = None) -> None:
    """Write values as little-endian float64 plus a JSON sidecar."""
    path_json = path_json or os.path.splitext(path_bin)[0] + ".json"
    np.ascontiguousarray(field.values, dtype="<f8").tofile(path_bin)
    meta = field.grid.to_dict()
    meta.update(norm=field.norm.spec(), scene_hash=field.scene.hash(), scene=field.scene.to_dict())
    with open(path_json, "w") as fh:
        json.dump(meta, fh, indent=1)


def load_field(path_bin: str, path_json: str | None = None) -> DistanceField:
    path_json = path_json or os.path.splitext(path_bin)[0] + ".json"
    with open(path_json) as fh:
        meta = json.load(fh)
    grid = GridSpec(meta["origin"], meta["h"], meta["dims"])
    values = np.fromfile(path_bin, dtype="<f8")
    if values.size != grid.size:
        raise ValueError(f"{path_bin}: expected {grid.size} values, found {values.size}")
    F = parse_scene(json.dumps(meta["scene"]))
    if F.hash() != meta["scene_hash"]:
        raise ValueError("scene does not match the recorded scene hash")
    values = values.reshape(grid.dims).astype(float)
    values.setflags(write=False)
    return DistanceField(grid, values, parse_norm(meta["norm"], grid.dim), F)


def export_csv(field: DistanceField, path: str, max_vertices: int = 10**6) -> None:
    if field.grid.size > max_vertices:
        raise ValueError("grid too large for CSV export")
    pts = field.grid.vertices()
    np.savetxt(path, np.column_stack([pts, field.values.ravel()]), delimiter=",", fmt="%.17g")
