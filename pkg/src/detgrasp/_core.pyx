# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for convolution and convex polygon clipping.

Every function here has a twin in ``_fallback.py`` with the same signature.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _valid(Py_ssize_t off, Py_ssize_t n_in, Py_ssize_t n_out,
                        Py_ssize_t* lo, Py_ssize_t* hi) noexcept nogil:
    # output indices i with 0 <= i + off < n_in
    lo[0] = -off if off < 0 else 0
    hi[0] = n_in - off if n_in - off < n_out else n_out
    if hi[0] < lo[0]:
        hi[0] = lo[0]


def conv2d_forward(const double[:, :, ::1] x, const double[:, :, :, ::1] w,
                   const double[::1] b, int ph, int pw, int dh, int dw):
    cdef Py_ssize_t C = x.shape[0], H = x.shape[1], W = x.shape[2]
    cdef Py_ssize_t O = w.shape[0], KH = w.shape[2], KW = w.shape[3]
    cdef Py_ssize_t Ho = H + 2 * ph - ((KH - 1) * dh + 1) + 1
    cdef Py_ssize_t Wo = W + 2 * pw - ((KW - 1) * dw + 1) + 1
    out_arr = np.empty((O, Ho, Wo), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t o, c, p, q, i, j, oy, ox, i0, i1, j0, j1
    cdef double wv
    with nogil:
        for o in range(O):
            for i in range(Ho):
                for j in range(Wo):
                    out[o, i, j] = b[o]
            # one tap at a time keeps the inner loop branch-free and contiguous
            for c in range(C):
                for p in range(KH):
                    oy = p * dh - ph
                    _valid(oy, H, Ho, &i0, &i1)
                    for q in range(KW):
                        ox = q * dw - pw
                        _valid(ox, W, Wo, &j0, &j1)
                        wv = w[o, c, p, q]
                        for i in range(i0, i1):
                            for j in range(j0, j1):
                                out[o, i, j] += wv * x[c, i + oy, j + ox]
    return out_arr


def conv2d_backward(const double[:, :, ::1] g, const double[:, :, ::1] x,
                    const double[:, :, :, ::1] w, int ph, int pw, int dh, int dw):
    cdef Py_ssize_t C = x.shape[0], H = x.shape[1], W = x.shape[2]
    cdef Py_ssize_t O = w.shape[0], KH = w.shape[2], KW = w.shape[3]
    cdef Py_ssize_t Ho = g.shape[1], Wo = g.shape[2]
    gx_arr = np.zeros((C, H, W), dtype=np.float64)
    gw_arr = np.zeros((O, C, KH, KW), dtype=np.float64)
    gb_arr = np.zeros(O, dtype=np.float64)
    cdef double[:, :, ::1] gx = gx_arr
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef Py_ssize_t o, c, p, q, i, j, oy, ox, i0, i1, j0, j1
    cdef double wv, acc
    with nogil:
        for o in range(O):
            acc = 0.0
            for i in range(Ho):
                for j in range(Wo):
                    acc = acc + g[o, i, j]
            gb[o] = acc
        for o in range(O):
            for c in range(C):
                for p in range(KH):
                    oy = p * dh - ph
                    _valid(oy, H, Ho, &i0, &i1)
                    for q in range(KW):
                        ox = q * dw - pw
                        _valid(ox, W, Wo, &j0, &j1)
                        wv = w[o, c, p, q]
                        acc = 0.0
                        for i in range(i0, i1):
                            for j in range(j0, j1):
                                gx[c, i + oy, j + ox] += wv * g[o, i, j]
                                acc = acc + x[c, i + oy, j + ox] * g[o, i, j]
                        gw[o, c, p, q] = acc
    return gx_arr, gw_arr, gb_arr


cdef double _signed_area(double[:, ::1] pts, Py_ssize_t n) noexcept nogil:
    cdef double s = 0.0
    cdef Py_ssize_t k, m
    for k in range(n):
        m = k + 1
        if m == n:
            m = 0
        s += pts[k, 0] * pts[m, 1] - pts[m, 0] * pts[k, 1]
    return 0.5 * s


def convex_intersection_area(const double[:, ::1] subject, const double[:, ::1] clip):
    """Area of the intersection of two convex polygons (any orientation)."""
    cdef Py_ssize_t ns = subject.shape[0], nc = clip.shape[0]
    cdef Py_ssize_t cap = ns + nc + 2
    if ns < 3 or nc < 3:
        return 0.0
    buf_a = np.empty((cap * 2, 2), dtype=np.float64)
    buf_b = np.empty((cap * 2, 2), dtype=np.float64)
    clip_arr = np.array(clip, dtype=np.float64, copy=True)
    cdef double[:, ::1] cur = buf_a
    cdef double[:, ::1] nxt = buf_b
    cdef double[:, ::1] cl = clip_arr
    cdef double[:, ::1] tmp
    cdef Py_ssize_t n, k, e, m, cnt
    cdef double ex0, ey0, ex1, ey1, sx, sy, px, py, ds, dp, t, a
    cdef double sa = 0.0
    # clip polygon must be counter-clockwise
    for k in range(nc):
        m = (k + 1) % nc
        sa += cl[k, 0] * cl[m, 1] - cl[m, 0] * cl[k, 1]
    if sa == 0.0:
        return 0.0
    if sa < 0.0:
        clip_arr = np.ascontiguousarray(clip_arr[::-1])
        cl = clip_arr
    for k in range(ns):
        cur[k, 0] = subject[k, 0]
        cur[k, 1] = subject[k, 1]
    n = ns
    for e in range(nc):
        if n == 0:
            break
        m = e + 1
        if m == nc:
            m = 0
        ex0 = cl[e, 0]; ey0 = cl[e, 1]
        ex1 = cl[m, 0]; ey1 = cl[m, 1]
        cnt = 0
        sx = cur[n - 1, 0]; sy = cur[n - 1, 1]
        ds = (ex1 - ex0) * (sy - ey0) - (ey1 - ey0) * (sx - ex0)
        for k in range(n):
            px = cur[k, 0]; py = cur[k, 1]
            dp = (ex1 - ex0) * (py - ey0) - (ey1 - ey0) * (px - ex0)
            if dp >= 0.0:
                if ds < 0.0:
                    t = ds / (ds - dp)
                    nxt[cnt, 0] = sx + t * (px - sx)
                    nxt[cnt, 1] = sy + t * (py - sy)
                    cnt += 1
                nxt[cnt, 0] = px
                nxt[cnt, 1] = py
                cnt += 1
            elif ds >= 0.0:
                t = ds / (ds - dp)
                nxt[cnt, 0] = sx + t * (px - sx)
                nxt[cnt, 1] = sy + t * (py - sy)
                cnt += 1
            sx = px; sy = py; ds = dp
        tmp = cur
        cur = nxt
        nxt = tmp
        n = cnt
    if n < 3:
        return 0.0
    a = _signed_area(cur, n)
    return a if a > 0.0 else -a
