"""Pure numpy implementations of the hot kernels (reference for _kernels.pyx)."""

from __future__ import annotations

import numpy as np


# --- marching squares ----------------------------------------------------------

def edge_ids(nx: int, ny: int):
    """Global edge numbering: horizontal (i,j)-(i+1,j) first, then vertical."""
    return (nx - 1) * ny


def march_squares(values: np.ndarray, r: float) -> np.ndarray:
    """Segments of {values = r} as pairs of global edge ids, shape (M, 2).

    Corners above r are set; saddle cells are resolved by the cell-centre mean.
    Cells are visited in row-major order.
    """
    v = np.asarray(values, dtype=np.float64)
    nx, ny = v.shape
    H = (nx - 1) * ny
    above = v > r
    c0, c1, c2, c3 = above[:-1, :-1], above[1:, :-1], above[1:, 1:], above[:-1, 1:]
    mask = c0.astype(np.int64) | (c1 << 1) | (c2 << 2) | (c3 << 3)
    active = np.argwhere((mask != 0) & (mask != 15))
    out = []
    for i, j in active:
        m = int(mask[i, j])
        e = (i * ny + j, H + (i + 1) * (ny - 1) + j, i * ny + j + 1, H + i * (ny - 1) + j)
        if m == 5 or m == 10:
            centre = 0.25 * (v[i, j] + v[i + 1, j] + v[i + 1, j + 1] + v[i, j + 1]) > r
            if (m == 5) == centre:
                out.append((e[0], e[1]))
                out.append((e[2], e[3]))
            else:
                out.append((e[0], e[3]))
                out.append((e[1], e[2]))
            continue
        b = [(m >> k) & 1 for k in range(4)]
        crossed = [k for k, (p, q) in enumerate(((0, 1), (1, 2), (3, 2), (0, 3))) if b[p] != b[q]]
        out.append((e[crossed[0]], e[crossed[1]]))
    return np.array(out, dtype=np.int64).reshape(-1, 2)


# --- multilinear interpolation on a grid -------------------------------------

def _locate(values, origin, h, X):
    dims = np.asarray(values.shape)
    rel = (X - origin) / h
    rel = np.clip(rel, 0, dims - 1)
    base = np.minimum(np.floor(rel).astype(np.int64), dims - 2)
    return base, rel - base


def interp(values, origin, h, X):
    base, frac = _locate(values, origin, h, X)
    dim = values.ndim
    out = np.zeros(X.shape[:-1])
    for corner in range(2**dim):
        w = np.ones(X.shape[:-1])
        idx = []
        for k in range(dim):
            b = (corner >> k) & 1
            w = w * (frac[..., k] if b else 1 - frac[..., k])
            idx.append(base[..., k] + b)
        out = out + w * values[tuple(idx)]
    return out


def interp_grad(values, origin, h, X):
    base, frac = _locate(values, origin, h, X)
    dim = values.ndim
    grad = np.zeros(X.shape)
    for corner in range(2**dim):
        bits = [(corner >> k) & 1 for k in range(dim)]
        val = values[tuple(base[..., k] + bits[k] for k in range(dim))]
        for a in range(dim):
            w = (1.0 if bits[a] else -1.0) / h * np.ones(X.shape[:-1])
            for k in range(dim):
                if k != a:
                    w = w * (frac[..., k] if bits[k] else 1 - frac[..., k])
            grad[..., a] += w * val
    return grad


# --- directional criterion -----------------------------------------------------

def probe_min_norm_gradients(values, origin, h, X, offsets, scale, iters=64):
    """Approximate min-norm element of conv{grad f(x + s*o) : o in offsets}.

    Gilbert's iteration: move towards the hull vertex minimising <p, g>.
    ``scale`` (N,) shrinks the probe pattern per vertex.
    """
    X = np.asarray(X, dtype=np.float64)
    S = np.asarray(scale, dtype=np.float64)[:, None, None]
    G = interp_grad(values, origin, h, X[:, None, :] + S * offsets[None, :, :])  # (N, P, D)
    p = G[:, 0, :].copy()
    for _ in range(iters):
        s = G[np.arange(len(X)), np.argmin(np.einsum("npd,nd->np", G, p), axis=1)]
        d = s - p
        dd = np.sum(d * d, axis=1)
        lam = np.where(dd > 0, -np.sum(p * d, axis=1) / np.where(dd > 0, dd, 1.0), 0.0)
        p = p + np.clip(lam, 0.0, 1.0)[:, None] * d
    return p


def _quotients(values, origin, h, X, V, offsets, ts, delta, scale):
    """Max counted quotient per (vertex, candidate); +inf when nothing counted."""
    S = scale[:, None, None]
    Z = X[:, None, :] + S * offsets[None, :, :]  # (N, P, D)
    fz = interp(values, origin, h, Z)
    worst = np.full(V.shape[:2], -np.inf)
    counted = np.zeros(V.shape[:2], dtype=bool)
    rad = (scale * delta)[:, None, None]
    for t in ts:
        ts_n = (scale * t)[:, None, None, None]
        Y = Z[:, None, :, :] + ts_n * V[:, :, None, :]  # (N, K, P, D)
        inside = np.sum((Y - X[:, None, None, :]) ** 2, axis=-1) <= rad * rad
        q = (interp(values, origin, h, Y) - fz[:, None, :]) / ts_n[..., 0]
        q = np.where(inside, q, -np.inf)
        worst = np.maximum(worst, q.max(axis=2))
        counted |= inside.any(axis=2)
    return np.where(counted, worst, np.inf)


def directional_scan(values, origin, h, X, first, dirs, offsets, ts, delta, margin, scale, batch=2048):
    """Regularity test by sampled descent directions.

    Probe offsets, steps and the neighbourhood radius are multiplied by
    ``scale[n]`` at vertex n.

    Candidates per vertex are ``first[n]`` (index 0) followed by the shared
    ``dirs`` (indices 1..K). A candidate passes when every counted quotient
    is below ``-margin``; the first passing candidate is reported.
    Returns (passed, eps, which) with eps = -max quotient of the reported
    candidate (the best one when none passes).
    """
    X = np.asarray(X, dtype=np.float64)
    origin = np.asarray(origin, dtype=np.float64)
    scale = np.asarray(scale, dtype=np.float64)
    N = len(X)
    passed = np.zeros(N, dtype=bool)
    eps = np.full(N, -np.inf)
    which = np.full(N, -1, dtype=np.int64)
    valid_first = np.all(np.isfinite(first), axis=1)
    q0 = np.full(N, np.inf)
    if valid_first.any():
        sel = np.flatnonzero(valid_first)
        q0[sel] = _quotients(values, origin, h, X[sel], first[sel][:, None, :], offsets, ts, delta, scale[sel])[:, 0]
    ok = q0 < -margin
    passed[ok] = True
    eps[ok] = -q0[ok]
    which[ok] = 0
    eps[~ok & valid_first] = -q0[~ok & valid_first]
    which[~ok & valid_first] = 0
    rest = np.flatnonzero(~ok)
    for s in range(0, len(rest), batch):
        idx = rest[s : s + batch]
        V = np.broadcast_to(dirs, (len(idx),) + dirs.shape)
        Q = _quotients(values, origin, h, X[idx], V, offsets, ts, delta, scale[idx])
        good = Q < -margin
        anyg = good.any(axis=1)
        firstg = np.argmax(good, axis=1)
        best = np.argmin(Q, axis=1)
        pick = np.where(anyg, firstg, best)
        qpick = Q[np.arange(len(idx)), pick]
        better = anyg | (-qpick > eps[idx])
        passed[idx] = anyg
        eps[idx] = np.where(better, -qpick, eps[idx])
        which[idx] = np.where(better, pick + 1, which[idx])
    return passed, eps, which


# --- hull criterion in the plane ---------------------------------------------

def hull_margin_2d(U: np.ndarray, counts: np.ndarray):
    """Distance from 0 to conv of unit vectors U[n, :counts[n]] and escape direction.

    If the directions fit in an arc of length S < pi the hull's nearest point
    to the origin is the chord midpoint at distance cos(S/2) and the escape
    direction is minus the arc bisector; otherwise the margin is 0.
    Returns (margin (N,), v (N, 2)).
    """
    U = np.asarray(U, dtype=np.float64)
    N, K, _ = U.shape
    ang = np.arctan2(U[:, :, 1], U[:, :, 0])
    valid = np.arange(K)[None, :] < counts[:, None]
    ang = np.where(valid, ang, np.inf)
    ang = np.sort(ang, axis=1)
    last = ang[np.arange(N), counts - 1]
    nxt = np.where(np.arange(K)[None, :] < counts[:, None] - 1, np.roll(ang, -1, axis=1), np.inf)
    with np.errstate(invalid="ignore"):
        gaps = np.where(np.isfinite(nxt), nxt - ang, np.nan)
    wrap = ang[:, 0] + 2 * np.pi - last  # gap from the last back to the first
    gaps[np.arange(N), counts - 1] = wrap
    gaps = np.where(valid, gaps, -np.inf)
    k = np.argmax(gaps, axis=1)
    G = gaps[np.arange(N), k]
    S = 2 * np.pi - G
    start = ang[np.arange(N), (k + 1) % np.maximum(counts, 1)]
    mid = start + 0.5 * S
    margin = np.where(S < np.pi, np.cos(0.5 * S), 0.0)
    v = -np.stack([np.cos(mid), np.sin(mid)], axis=1)
    return np.maximum(margin, 0.0), v
