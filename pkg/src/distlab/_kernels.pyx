# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Semantics match distlab._fallback exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, atan2, cos, sin, M_PI, INFINITY

cnp.import_array()


def march_squares(values, double r):
    cdef const double[:, :] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t nx = v.shape[0], ny = v.shape[1]
    cdef Py_ssize_t H = (nx - 1) * ny
    cdef Py_ssize_t i, j, n = 0, cap = 1024
    cdef int m, k, p, q, nc
    cdef bint centre
    cdef long long e[4]
    cdef int crossed[2]
    cdef int pairs[8]
    pairs[:] = [0, 1, 1, 2, 3, 2, 0, 3]
    out = np.empty((cap, 2), dtype=np.int64)
    cdef long long[:, :] o = out
    for i in range(nx - 1):
        for j in range(ny - 1):
            m = (v[i, j] > r) | ((v[i + 1, j] > r) << 1) | ((v[i + 1, j + 1] > r) << 2) | ((v[i, j + 1] > r) << 3)
            if m == 0 or m == 15:
                continue
            if n + 2 > cap:
                cap *= 2
                out = np.resize(out, (cap, 2))
                o = out
            e[0] = i * ny + j
            e[1] = H + (i + 1) * (ny - 1) + j
            e[2] = i * ny + j + 1
            e[3] = H + i * (ny - 1) + j
            if m == 5 or m == 10:
                centre = 0.25 * (v[i, j] + v[i + 1, j] + v[i + 1, j + 1] + v[i, j + 1]) > r
                if (m == 5) == centre:
                    o[n, 0] = e[0]; o[n, 1] = e[1]
                    o[n + 1, 0] = e[2]; o[n + 1, 1] = e[3]
                else:
                    o[n, 0] = e[0]; o[n, 1] = e[3]
                    o[n + 1, 0] = e[1]; o[n + 1, 1] = e[2]
                n += 2
                continue
            nc = 0
            for k in range(4):
                p = pairs[2 * k]
                q = pairs[2 * k + 1]
                if ((m >> p) & 1) != ((m >> q) & 1):
                    crossed[nc] = k
                    nc += 1
            o[n, 0] = e[crossed[0]]
            o[n, 1] = e[crossed[1]]
            n += 1
    return out[:n].copy()


# --- multilinear interpolation ------------------------------------------------

cdef inline void _locate(double x, double o, double h, Py_ssize_t n, Py_ssize_t* b, double* f) nogil:
    cdef double rel = (x - o) / h
    if rel < 0:
        rel = 0
    if rel > n - 1:
        rel = n - 1
    cdef Py_ssize_t bb = <Py_ssize_t>floor(rel)
    if bb > n - 2:
        bb = n - 2
    b[0] = bb
    f[0] = rel - bb


cdef inline double _interp(const double[::1] v, Py_ssize_t* dims, int D, double* orig, double h,
                           double* x, double* grad) nogil:
    """Value of the multilinear interpolant at x; gradient into grad if not NULL."""
    cdef Py_ssize_t b[3]
    cdef double f[3]
    cdef int k, a, corner, bit
    cdef Py_ssize_t idx, stride
    cdef double w, val, out = 0.0, wa
    for k in range(D):
        _locate(x[k], orig[k], h, dims[k], &b[k], &f[k])
    if grad != NULL:
        for k in range(D):
            grad[k] = 0.0
    for corner in range(1 << D):
        idx = 0
        w = 1.0
        for k in range(D):
            bit = (corner >> k) & 1
            idx = idx * dims[k] + b[k] + bit
            w *= f[k] if bit else 1.0 - f[k]
        val = v[idx]
        out += w * val
        if grad != NULL:
            for a in range(D):
                wa = (1.0 if (corner >> a) & 1 else -1.0) / h
                for k in range(D):
                    if k != a:
                        wa *= f[k] if (corner >> k) & 1 else 1.0 - f[k]
                grad[a] += wa * val
    return out


cdef inline void _setup(values, origin, Py_ssize_t* dims, double* orig, int* D):
    D[0] = values.ndim
    cdef int k
    for k in range(D[0]):
        dims[k] = values.shape[k]
        orig[k] = origin[k]


def probe_min_norm_gradients(values, origin, double h, X, offsets, scale, int iters=64):
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64).ravel()
    cdef Py_ssize_t dims[3]
    cdef double orig[3]
    cdef int D
    _setup(values, origin, dims, orig, &D)
    cdef const double[:, :] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, :] Ov = np.ascontiguousarray(offsets, dtype=np.float64)
    cdef const double[:] Sv = np.ascontiguousarray(scale, dtype=np.float64)
    cdef Py_ssize_t N = Xv.shape[0], P = Ov.shape[0], n, i, it
    cdef int k, best
    res = np.empty((N, D), dtype=np.float64)
    cdef double[:, :] R = res
    G_arr = np.empty((P, D), dtype=np.float64)
    cdef double[:, ::1] G = G_arr
    cdef double z[3]
    cdef double g[3]
    cdef double p[3]
    cdef double s, sm, dd, pd, lam
    with nogil:
        for n in range(N):
            for i in range(P):
                for k in range(D):
                    z[k] = Xv[n, k] + Sv[n] * Ov[i, k]
                _interp(v, dims, D, orig, h, z, g)
                for k in range(D):
                    G[i, k] = g[k]
            for k in range(D):
                p[k] = G[0, k]
            for it in range(iters):
                best = 0
                sm = INFINITY
                for i in range(P):
                    s = 0.0
                    for k in range(D):
                        s += G[i, k] * p[k]
                    if s < sm:
                        sm = s
                        best = i
                dd = 0.0
                pd = 0.0
                for k in range(D):
                    dd += (G[best, k] - p[k]) * (G[best, k] - p[k])
                    pd += p[k] * (G[best, k] - p[k])
                lam = -pd / dd if dd > 0 else 0.0
                if lam < 0:
                    lam = 0.0
                if lam > 1:
                    lam = 1.0
                for k in range(D):
                    p[k] = p[k] + lam * (G[best, k] - p[k])
            for k in range(D):
                R[n, k] = p[k]
    return res


cdef double _candidate(const double[::1] v, Py_ssize_t* dims, int D, double* orig, double h,
                       double* x, double* dirv, const double[:, :] Ov, const double[:] ts,
                       double* fz, double delta, double sc) nogil:
    """Max counted quotient of one candidate; +inf when nothing is counted."""
    cdef Py_ssize_t i, P = Ov.shape[0], T = ts.shape[0], j
    cdef int k
    cdef double y[3]
    cdef double worst = -INFINITY, q, t, r2
    cdef bint counted = False
    cdef double rad = sc * delta
    for j in range(T):
        t = sc * ts[j]
        for i in range(P):
            r2 = 0.0
            for k in range(D):
                y[k] = x[k] + sc * Ov[i, k] + t * dirv[k]
                r2 += (y[k] - x[k]) * (y[k] - x[k])
            if r2 > rad * rad:
                continue
            counted = True
            q = (_interp(v, dims, D, orig, h, y, NULL) - fz[i]) / t
            if q > worst:
                worst = q
    return worst if counted else INFINITY


def directional_scan(values, origin, double h, X, first, dirs, offsets, ts, double delta, double margin, scale):
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64).ravel()
    cdef Py_ssize_t dims[3]
    cdef double orig[3]
    cdef int D
    _setup(values, origin, dims, orig, &D)
    cdef const double[:, :] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, :] Fv = np.ascontiguousarray(first, dtype=np.float64)
    cdef const double[:, :] Dv = np.ascontiguousarray(dirs, dtype=np.float64)
    cdef const double[:, :] Ov = np.ascontiguousarray(offsets, dtype=np.float64)
    cdef const double[:] Tv = np.ascontiguousarray(ts, dtype=np.float64)
    cdef const double[:] Sv = np.ascontiguousarray(scale, dtype=np.float64)
    cdef Py_ssize_t N = Xv.shape[0], K = Dv.shape[0], P = Ov.shape[0], n, c, i
    cdef int k
    passed_a = np.zeros(N, dtype=bool)
    eps_a = np.full(N, -np.inf)
    which_a = np.full(N, -1, dtype=np.int64)
    cdef cnp.npy_bool[:] passed = passed_a
    cdef double[:] eps = eps_a
    cdef long long[:] which = which_a
    fz_a = np.empty(P, dtype=np.float64)
    cdef double[::1] fz = fz_a
    cdef double x[3]
    cdef double z[3]
    cdef double dv[3]
    cdef double q
    cdef bint finite
    with nogil:
        for n in range(N):
            for k in range(D):
                x[k] = Xv[n, k]
            for i in range(P):
                for k in range(D):
                    z[k] = x[k] + Sv[n] * Ov[i, k]
                fz[i] = _interp(v, dims, D, orig, h, z, NULL)
            finite = True
            for k in range(D):
                dv[k] = Fv[n, k]
                if not (dv[k] == dv[k]) or dv[k] == INFINITY or dv[k] == -INFINITY:
                    finite = False
            if finite:
                q = _candidate(v, dims, D, orig, h, x, dv, Ov, Tv, &fz[0], delta, Sv[n])
                which[n] = 0
                eps[n] = -q
                if q < -margin:
                    passed[n] = True
                    continue
            for c in range(K):
                for k in range(D):
                    dv[k] = Dv[c, k]
                q = _candidate(v, dims, D, orig, h, x, dv, Ov, Tv, &fz[0], delta, Sv[n])
                if q < -margin:
                    passed[n] = True
                    eps[n] = -q
                    which[n] = c + 1
                    break
                if -q > eps[n]:
                    eps[n] = -q
                    which[n] = c + 1
    return passed_a, eps_a, which_a


def hull_margin_2d(U, counts):
    cdef const double[:, :, :] Uv = np.ascontiguousarray(U, dtype=np.float64)
    cdef const long long[:] cv = np.ascontiguousarray(counts, dtype=np.int64)
    cdef Py_ssize_t N = Uv.shape[0], K = Uv.shape[1], n, i, j, c, kbest
    margin_a = np.zeros(N)
    v_a = np.zeros((N, 2))
    cdef double[:] margin = margin_a
    cdef double[:, :] vv = v_a
    ang_a = np.empty(K)
    cdef double[::1] ang = ang_a
    cdef double G, gap, S, mid, t
    for n in range(N):
        c = cv[n]
        for i in range(c):
            ang[i] = atan2(Uv[n, i, 1], Uv[n, i, 0])
        # insertion sort: rows hold only a few directions
        for i in range(1, c):
            t = ang[i]
            j = i - 1
            while j >= 0 and ang[j] > t:
                ang[j + 1] = ang[j]
                j -= 1
            ang[j + 1] = t
        G = -INFINITY
        kbest = 0
        for i in range(c):
            if i < c - 1:
                gap = ang[i + 1] - ang[i]
            else:
                gap = ang[0] + 2 * M_PI - ang[c - 1]
            if gap > G:
                G = gap
                kbest = i
        S = 2 * M_PI - G
        mid = ang[(kbest + 1) % c] + 0.5 * S
        margin[n] = cos(0.5 * S) if S < M_PI else 0.0
        if margin[n] < 0:
            margin[n] = 0.0
        vv[n, 0] = -cos(mid)
        vv[n, 1] = -sin(mid)
    return margin_a, v_a
