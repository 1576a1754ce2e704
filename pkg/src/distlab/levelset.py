"""Level sets {d = r} of sampled distance fields and their structure checks."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.sparse import coo_matrix, identity
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree

from . import kernels
from .critical import hausdorff_box_estimate, HausdorffEstimate
from .field import DistanceField
from .scene import Ball, ClosedSet, Point, Segment, distance, nearest_table

SNAP_TOL = 1e-12
SNAP_SHIFT = 1e-10
PINCH_FACTOR = 2.0  # pinch radius in grid spacings
ARC_FACTOR = 10.0  # arc/chord ratio that marks a pinch
DIJKSTRA_CHUNK = 256


class LevelSetError(ValueError):
    pass


@dataclass
class LevelSetMesh:
    r: float
    vertices: np.ndarray
    cells: np.ndarray  # (M, 2) segments or (M, 3) triangles
    labels: np.ndarray  # component label per cell
    h: float | None = None
    bounds: tuple | None = None  # (lo, hi) of the sampling grid

    @property
    def dim(self):
        return self.vertices.shape[1]

    @property
    def n_components(self):
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def length(self) -> float:
        """Total length (2-D) or area (3-D)."""
        V = self.vertices
        if self.cells.shape[1] == 2:
            return float(np.sum(np.linalg.norm(V[self.cells[:, 1]] - V[self.cells[:, 0]], axis=1)))
        a, b, c = V[self.cells[:, 0]], V[self.cells[:, 1]], V[self.cells[:, 2]]
        return float(0.5 * np.sum(np.linalg.norm(np.cross(b - a, c - a), axis=1)))

    def on_boundary(self, tol=1e-9):
        if self.bounds is None:
            return np.zeros(len(self.vertices), dtype=bool)
        lo, hi = self.bounds
        return np.any((self.vertices <= lo + tol) | (self.vertices >= hi - tol), axis=1)


@dataclass
class ManifoldVerdict:
    manifold: bool
    defects: list = dc_field(default_factory=list)  # (kind, location)

    @property
    def status(self):
        return "Manifold" if self.manifold else "NonManifold"


# --- extraction --------------------------------------------------------------

def snap_radius(values: np.ndarray, r: float) -> float:
    """Shift r by 1e-10 * range while it collides with a vertex value."""
    span = float(values.max() - values.min())
    for _ in range(8):
        if not np.any(np.abs(values - r) <= SNAP_TOL):
            break
        r = r + SNAP_SHIFT * span
    return r


def _label(cells, n_vertices):
    if len(cells) == 0:
        return np.zeros(0, dtype=np.int64)
    k = cells.shape[1]
    rows = np.repeat(cells[:, 0], k - 1)
    cols = cells[:, 1:].ravel()
    A = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_vertices, n_vertices))
    _, lab = connected_components(A, directed=False)
    # relabel by first appearance so labels are deterministic and compact
    _, first, inv = np.unique(lab[cells[:, 0]], return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inv].astype(np.int64)


def extract_level_set(field: DistanceField, r: float) -> LevelSetMesh:
    """Marching squares (2-D) or marching cubes (3-D) at level r."""
    v = np.asarray(field.values)
    lo_v, hi_v = float(v.min()), float(v.max())
    if not lo_v < r < hi_v:
        raise LevelSetError(f"r={r} outside the field range ({lo_v}, {hi_v})")
    r = snap_radius(v, r)
    g = field.grid
    origin = np.asarray(g.origin)
    bounds = (origin, g.upper)
    if g.dim == 2:
        pairs = kernels.march_squares(v, r)
        ids, cells = np.unique(pairs, return_inverse=True)
        cells = cells.reshape(-1, 2)
        nx, ny = v.shape
        H = (nx - 1) * ny
        horiz = ids < H
        i = np.where(horiz, ids // ny, (ids - H) // (ny - 1))
        j = np.where(horiz, ids % ny, (ids - H) % (ny - 1))
        i2 = np.where(horiz, i + 1, i)
        j2 = np.where(horiz, j, j + 1)
        v0, v1 = v[i, j], v[i2, j2]
        t = (r - v0) / (v1 - v0)
        p0 = np.stack([i, j], axis=1).astype(float)
        p1 = np.stack([i2, j2], axis=1).astype(float)
        verts = origin + g.h * (p0 + t[:, None] * (p1 - p0))
    else:
        from skimage.measure import marching_cubes

        verts, faces, _, _ = marching_cubes(v, level=r, spacing=(g.h,) * 3, method="lewiner",
                                            allow_degenerate=False)
        verts = verts + origin
        cells = faces.astype(np.int64)
    return LevelSetMesh(float(r), verts, cells, _label(cells, len(verts)), g.h, bounds)


def polylines(mesh: LevelSetMesh):
    """Ordered vertex chains of a 2-D mesh as (indices, closed) pairs."""
    if mesh.cells.shape[1] != 2:
        raise ValueError("polylines are defined for 2-D meshes")
    nbrs = [[] for _ in range(len(mesh.vertices))]
    for a, b in mesh.cells:
        nbrs[a].append(b)
        nbrs[b].append(a)
    seen = np.zeros(len(mesh.vertices), dtype=bool)
    out = []
    deg = np.array([len(n) for n in nbrs])
    # open chains start at degree-1 vertices, then remaining cycles
    starts = list(np.flatnonzero(deg == 1)) + list(np.flatnonzero(deg >= 2))
    for s in starts:
        if seen[s]:
            continue
        chain = [s]
        seen[s] = True
        prev, cur = -1, s
        closed = False
        while True:
            nxt = [n for n in nbrs[cur] if n != prev and not seen[n]]
            if not nxt:
                closed = len(chain) > 2 and s in nbrs[cur]
                break
            prev, cur = cur, nxt[0]
            seen[cur] = True
            chain.append(cur)
        out.append((np.array(chain), closed))
    return out


def _arc_positions(mesh: LevelSetMesh):
    """Arc-length coordinate, chain id, chain length and closedness per vertex (2-D)."""
    n = len(mesh.vertices)
    s = np.zeros(n)
    chain = np.full(n, -1)
    lengths, closed = [], []
    for k, (idx, cl) in enumerate(polylines(mesh)):
        P = mesh.vertices[idx]
        steps = np.linalg.norm(np.diff(P, axis=0), axis=1)
        s[idx] = np.concatenate([[0.0], np.cumsum(steps)])
        total = steps.sum() + (np.linalg.norm(P[-1] - P[0]) if cl else 0.0)
        chain[idx] = k
        lengths.append(total)
        closed.append(cl)
    return s, chain, np.array(lengths), np.array(closed)


def _pinches(mesh: LevelSetMesh, limit: int = 100):
    """Pairs of vertices close in space but far apart along the level set."""
    if mesh.h is None or len(mesh.vertices) == 0:
        return []
    tau = PINCH_FACTOR * mesh.h
    pairs = cKDTree(mesh.vertices).query_pairs(tau, output_type="ndarray")
    if len(pairs) == 0:
        return []
    vlab = np.full(len(mesh.vertices), -1)
    vlab[mesh.cells.ravel()] = np.repeat(mesh.labels, mesh.cells.shape[1])
    # pieces that leave the sampling window may meet again outside it
    edge = mesh.on_boundary(tol=tau)
    pairs = pairs[~(edge[pairs[:, 0]] & edge[pairs[:, 1]])]
    a, b = pairs[:, 0], pairs[:, 1]
    bad = vlab[a] != vlab[b]
    same = np.flatnonzero(~bad)
    if mesh.dim == 2:
        s, chain, lengths, closed = _arc_positions(mesh)
        ds = np.abs(s[a[same]] - s[b[same]])
        L = lengths[chain[a[same]]]
        arc = np.where(closed[chain[a[same]]], np.minimum(ds, L - ds), ds)
        bad[same] = arc > ARC_FACTOR * tau
    elif len(same):
        V = mesh.vertices
        e = np.concatenate([mesh.cells[:, [0, 1]], mesh.cells[:, [1, 2]], mesh.cells[:, [2, 0]]])
        w = np.linalg.norm(V[e[:, 0]] - V[e[:, 1]], axis=1)
        G = coo_matrix((w, (e[:, 0], e[:, 1])), shape=(len(V), len(V))).tocsr()
        arc_limit = ARC_FACTOR * tau
        # pairs joined within HOPS edges are close along the mesh: every edge of
        # a marching-cubes triangle is at most sqrt(3) h long
        hops = int(arc_limit // (np.sqrt(3) * mesh.h))
        B = (G + G.T + identity(len(V), format="csr")).astype(bool)
        R, k = B, 1
        while 2 * k <= hops:
            R, k = (R @ R).astype(bool), 2 * k
        near = np.asarray(R[a[same], b[same]]).ravel()
        todo = same[~near]
        far = np.zeros(len(todo), dtype=bool)
        src, inv = np.unique(a[todo], return_inverse=True)
        for lo in range(0, len(src), DIJKSTRA_CHUNK):
            sel = (inv >= lo) & (inv < lo + DIJKSTRA_CHUNK)
            D = dijkstra(G, directed=False, indices=src[lo : lo + DIJKSTRA_CHUNK], limit=arc_limit * 1.0001)
            far[sel] = D[inv[sel] - lo, b[todo][sel]] > arc_limit
        bad[same] = False
        bad[todo] = far
    hits = pairs[bad]
    locs = 0.5 * (mesh.vertices[hits[:, 0]] + mesh.vertices[hits[:, 1]])
    return [("pinch", loc) for loc in locs[:limit]]


def manifold_check(mesh: LevelSetMesh) -> ManifoldVerdict:
    """Combinatorial manifold test plus a geometric pinch test.

    2-D: every vertex has degree 2 (degree 1 allowed on the grid boundary,
    where the level set leaves the sampled window). 3-D: every edge borders
    two triangles (one on the grid boundary) and every vertex link is a
    single cycle (a path on the boundary). In both cases two vertices closer
    than 2h that are far apart along the mesh mark a pinch.
    """
    if len(mesh.cells) == 0:
        raise ValueError("empty mesh")
    V, C = mesh.vertices, mesh.cells
    border = mesh.on_boundary()
    defects = []
    if C.shape[1] == 2:
        deg = np.bincount(C.ravel(), minlength=len(V))
        bad = (deg != 2) & ~((deg == 1) & border)
        defects += [(f"degree-{deg[i]}", V[i]) for i in np.flatnonzero(bad)]
    else:
        e = np.sort(np.concatenate([C[:, [0, 1]], C[:, [1, 2]], C[:, [2, 0]]]), axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        bnd = border[uniq[:, 0]] & border[uniq[:, 1]]
        bad = (counts > 2) | ((counts == 1) & ~bnd)
        defects += [("edge", 0.5 * (V[a] + V[b])) for a, b in uniq[bad]]
        defects += _link_defects(mesh, border)
    defects += _pinches(mesh)
    return ManifoldVerdict(not defects, defects)


def _link_defects(mesh, border):
    """Vertices whose link (opposite edges of incident triangles) is not one cycle/path."""
    C = mesh.cells
    opp = np.concatenate([C[:, [1, 2]], C[:, [2, 0]], C[:, [0, 1]]])
    centre = np.concatenate([C[:, 0], C[:, 1], C[:, 2]])
    order = np.argsort(centre, kind="stable")
    centre, opp = centre[order], opp[order]
    cuts = np.flatnonzero(np.diff(centre)) + 1
    out = []
    for grp_c, grp_e in zip(np.split(centre, cuts), np.split(opp, cuts)):
        vtx = int(grp_c[0])
        if not _is_cycle_or_path(grp_e.tolist(), bool(border[vtx])):
            out.append(("link", mesh.vertices[vtx]))
    return out


def _is_cycle_or_path(edges, on_border):
    """Is the small graph given by ``edges`` one cycle (or one path if on_border)?"""
    parent, deg = {}, {}

    def find(u):
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    for u, v in edges:
        for w in (u, v):
            parent.setdefault(w, w)
            deg[w] = deg.get(w, 0) + 1
        parent[find(u)] = find(v)
    if len({find(u) for u in parent}) != 1 or max(deg.values()) > 2:
        return False
    ends = sum(1 for d in deg.values() if d == 1)
    return ends == 0 or (on_border and ends == 2)


# --- Lipschitz graph test ---------------------------------------------------

@dataclass
class GraphSample:
    point: np.ndarray
    passed: bool
    lipschitz: float
    samples: int


def lipschitz_graph_check(field: DistanceField, mesh: LevelSetMesh, window: float = 0.2,
                          samples: int = 50, seed: int = 0, points=None):
    """Is the level set locally a graph over the plane orthogonal to the witness direction?

    At each sampled mesh vertex x the normal is the direction to the nearest
    point of F; nearby mesh vertices (within ``window``) get base coordinates
    in the orthogonal complement and a height along the normal. The sample
    fails when two vertices share a base point within h/2 but their heights
    differ by more than 2h; the reported constant is the largest slope among
    pairs whose bases are at least h/2 apart.
    """
    h = field.h
    V = mesh.vertices
    if points is None:
        rng = np.random.default_rng(seed)
        pick = np.sort(rng.choice(len(V), size=min(samples, len(V)), replace=False))
        points = V[pick]
    points = np.atleast_2d(np.asarray(points, dtype=float))
    from .norms import Norm

    D, P = nearest_table(field.scene, points, Norm.euclid(field.grid.dim))
    W = P[np.arange(len(points)), np.argmin(D, axis=1)]
    tree = cKDTree(V)
    out = []
    for x, w in zip(points, W):
        n = (w - x) / np.linalg.norm(w - x)
        near = V[tree.query_ball_point(x, window)]
        if len(near) < 3:
            raise ValueError(f"too few level-set vertices within {window} of {x}")
        rel = near - x
        height = rel @ n
        base = rel - height[:, None] * n
        du = np.linalg.norm(base[:, None, :] - base[None, :, :], axis=2)
        dh = np.abs(height[:, None] - height[None, :])
        clash = (du < h / 2) & (dh > 2 * h)
        far = du >= h / 2
        lip = float(np.max(np.where(far, dh / np.where(far, du, 1.0), 0.0)))
        out.append(GraphSample(x, not clash.any(), lip, len(near)))
    return out


# --- semiconcavity -----------------------------------------------------------

@dataclass
class SemiconcavityVerdict:
    passed: bool
    tested: int
    worst: float  # largest violation of the midpoint inequality
    triple: tuple | None = None  # (a, b, m) of the worst violation when failing


def _touches(F: ClosedSet, lo, hi) -> bool:
    for p in F.primitives:
        if isinstance(p, Point):
            if np.all((np.asarray(p.at) >= lo) & (np.asarray(p.at) <= hi)):
                return True
        elif isinstance(p, Segment):
            a, b = np.asarray(p.a), np.asarray(p.b)
            t0, t1 = 0.0, 1.0
            d = b - a
            for k in range(len(a)):
                if d[k] == 0:
                    if not lo[k] <= a[k] <= hi[k]:
                        t0, t1 = 1.0, 0.0
                    continue
                u, v = (lo[k] - a[k]) / d[k], (hi[k] - a[k]) / d[k]
                t0, t1 = max(t0, min(u, v)), min(t1, max(u, v))
            if t0 <= t1:
                return True
        elif isinstance(p, Ball):
            c = np.asarray(p.center)
            if np.linalg.norm(np.clip(c, lo, hi) - c) <= p.radius:
                return True
    return False


def semiconcavity_check(field: DistanceField, region, c: float, triples: int = 100000, seed: int = 0,
                        band=None, tol: float = 1e-6, batch: int = 20000) -> SemiconcavityVerdict:
    """Midpoint test of concavity of d(x) - (c/2)|x|^2 (Euclidean |.|).

    ``region`` is a box (lo, hi), optionally intersected with the band
    band[0] <= d <= band[1]. Endpoints and midpoint of each triple lie in the
    region (rejection sampling). Distances are exact scene queries.
    """
    lo, hi = (np.asarray(b, dtype=float) for b in region)
    F, norm = field.scene, field.norm
    if (band is None or band[0] <= 0) and _touches(F, lo, hi):
        raise ValueError("the region touches the closed set")
    rng = np.random.default_rng(seed)

    def in_band(d):
        if band is None:
            return np.ones(len(d), dtype=bool)
        return (d >= band[0]) & (d <= band[1])

    tested, worst, triple = 0, -np.inf, None
    attempts = 0
    while tested < triples:
        attempts += 1
        if attempts > 1000:
            raise ValueError("region too thin to sample midpoint triples")
        A = rng.uniform(lo, hi, size=(batch, len(lo)))
        B = rng.uniform(lo, hi, size=(batch, len(lo)))
        M = 0.5 * (A + B)
        dA, dB, dM = (distance(F, X, norm) for X in (A, B, M))
        ok = in_band(dA) & in_band(dB) & in_band(dM)
        if band is None:
            ok &= (dA > 0) & (dB > 0) & (dM > 0)
        ok = np.flatnonzero(ok)[: triples - tested]
        if len(ok) == 0:
            continue
        q = lambda d, X: d - 0.5 * c * np.sum(X * X, axis=1)
        gap = 0.5 * (q(dA[ok], A[ok]) + q(dB[ok], B[ok])) - q(dM[ok], M[ok])
        k = int(np.argmax(gap))
        if gap[k] > worst:
            worst = float(gap[k])
            triple = (A[ok][k], B[ok][k], M[ok][k])
        tested += len(ok)
    passed = worst <= tol
    return SemiconcavityVerdict(passed, tested, worst, None if passed else triple)


# --- boundary of sublevel set vs level set ----------------------------------

@dataclass
class BoundaryComparison:
    r: float
    hausdorff: float
    coincide: bool
    level_vertices: int
    boundary_vertices: int


def boundary_vs_level(field: DistanceField, r: float) -> BoundaryComparison:
    """Compare {|d - r| <= h} with the grid boundary of {d <= r} (vertex sets)."""
    v = np.asarray(field.values)
    if not v.min() < r < v.max():
        raise LevelSetError(f"r={r} outside the field range")
    h = field.h
    level = np.abs(v - r) <= h
    inside = v <= r
    outside_nbr = np.zeros_like(inside)
    for ax in range(v.ndim):
        for sh in (1, -1):
            rolled = np.roll(v > r, sh, axis=ax)
            edge = [slice(None)] * v.ndim
            edge[ax] = 0 if sh == 1 else -1
            rolled[tuple(edge)] = False
            outside_nbr |= rolled
    bnd = inside & outside_nbr
    P = field.grid.vertices(np.flatnonzero(level.ravel()))
    Q = field.grid.vertices(np.flatnonzero(bnd.ravel()))
    if len(P) == 0 or len(Q) == 0:
        hd = np.inf
    else:
        hd = max(cKDTree(Q).query(P)[0].max(), cKDTree(P).query(Q)[0].max())
    return BoundaryComparison(float(r), float(hd), bool(hd <= 2 * h), int(len(P)), int(len(Q)))


# --- radius sweep ------------------------------------------------------------

@dataclass
class SweepEntry:
    r: float
    components: int
    manifold: bool
    defects: int
    critical_distance: float | None


@dataclass
class SweepReport:
    radii: np.ndarray
    entries: list
    exceptional: HausdorffEstimate
    params: dict

    def failing(self):
        return np.array([e.r for e in self.entries if not e.manifold])

    def to_dict(self):
        return {
            "params": self.params,
            "radii": self.radii.tolist(),
            "results": [
                {"r": e.r, "components": e.components, "verdict": "Manifold" if e.manifold else "NonManifold",
                 "defects": e.defects, "critical_distance": e.critical_distance}
                for e in self.entries
            ],
            "exceptional": {"s": self.exceptional.s, "delta": self.exceptional.delta,
                            "premeasure": self.exceptional.premeasure},
        }


def radius_sweep(field: DistanceField, r_min: float, r_max: float, count: int,
                 critical_values=None, threads: int = 1) -> SweepReport:
    """Extract and manifold-check ``count`` equispaced radii in [r_min, r_max]."""
    if not r_min < r_max or count < 1:
        raise ValueError("need r_min < r_max and count >= 1")
    radii = np.linspace(r_min, r_max, count)
    cv = None if critical_values is None else np.sort(np.asarray(critical_values, dtype=float))

    def work(r):
        mesh = extract_level_set(field, float(r))
        verdict = manifold_check(mesh)
        dist = None
        if cv is not None and len(cv):
            dist = float(np.min(np.abs(cv - r)))
        return SweepEntry(float(r), mesh.n_components, verdict.manifold, len(verdict.defects), dist)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            entries = list(pool.map(work, radii))
    else:
        entries = [work(r) for r in radii]
    failing = [e.r for e in entries if not e.manifold]
    s = (field.grid.dim - 1) / 2
    est = hausdorff_box_estimate(failing, s, 4 * field.h)
    params = {"r_min": r_min, "r_max": r_max, "count": count, "h": field.h, "norm": field.norm.spec()}
    return SweepReport(radii, entries, est, params)


# --- output ------------------------------------------------------------------

def mesh_to_json(mesh: LevelSetMesh) -> dict:
    return {
        "r": mesh.r,
        "components": mesh.n_components,
        "polylines": [
            {"closed": bool(cl), "points": mesh.vertices[idx].tolist()} for idx, cl in polylines(mesh)
        ],
    }


def write_obj(mesh: LevelSetMesh, path: str) -> None:
    with open(path, "w") as fh:
        for p in mesh.vertices:
            fh.write("v " + " ".join(format(float(c), ".17g") for c in p) + "\n")
        for t in mesh.cells:
            fh.write("f " + " ".join(str(int(i) + 1) for i in t) + "\n")
