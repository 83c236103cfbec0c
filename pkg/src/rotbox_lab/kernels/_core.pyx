# Compiled twin of _pure.py -- keep the two in lockstep (same corner
# order, same inside test, same intersection formula).

from libc.math cimport cos, sin, fabs

import numpy as np

cdef double _AREA_EPS = 1e-12

# clipping a quad by a quad yields at most 8 vertices; 16 gives headroom
DEF MAXV = 16


cdef void _corners(double cx, double cy, double w, double h, double t,
                   double* xs, double* ys) noexcept nogil:
    cdef double c = cos(t)
    cdef double s = sin(t)
    cdef double hw = 0.5 * w
    cdef double hh = 0.5 * h
    xs[0] = cx + c * (-hw) - s * (-hh); ys[0] = cy + s * (-hw) + c * (-hh)
    xs[1] = cx + c * hw - s * (-hh);    ys[1] = cy + s * hw + c * (-hh)
    xs[2] = cx + c * hw - s * hh;       ys[2] = cy + s * hw + c * hh
    xs[3] = cx + c * (-hw) - s * hh;    ys[3] = cy + s * (-hw) + c * hh


cdef double _clip_area(double* sxs, double* sys,
                       double* cxs, double* cys) noexcept nogil:
    cdef double ax[MAXV]
    cdef double ay[MAXV]
    cdef double bx[MAXV]
    cdef double by[MAXV]
    cdef double e1x, e1y, e2x, e2y, sx, sy, px, py, den, n1, n2
    cdef double acc, x0, y0, x1, y1
    cdef int na, nb, i, j, k
    cdef bint s_in, p_in

    for i in range(4):
        ax[i] = sxs[i]
        ay[i] = sys[i]
    na = 4

    for i in range(4):
        if na == 0:
            return 0.0
        e1x = cxs[i]; e1y = cys[i]
        e2x = cxs[(i + 1) % 4]; e2y = cys[(i + 1) % 4]
        nb = 0
        sx = ax[na - 1]; sy = ay[na - 1]
        s_in = (e2x - e1x) * (sy - e1y) - (e2y - e1y) * (sx - e1x) >= 0.0
        for j in range(na):
            px = ax[j]; py = ay[j]
            p_in = (e2x - e1x) * (py - e1y) - (e2y - e1y) * (px - e1x) >= 0.0
            if p_in != s_in:
                den = (e1x - e2x) * (sy - py) - (e1y - e2y) * (sx - px)
                n1 = e1x * e2y - e1y * e2x
                n2 = sx * py - sy * px
                bx[nb] = (n1 * (sx - px) - (e1x - e2x) * n2) / den
                by[nb] = (n1 * (sy - py) - (e1y - e2y) * n2) / den
                nb += 1
            if p_in:
                bx[nb] = px
                by[nb] = py
                nb += 1
            sx = px; sy = py; s_in = p_in
        na = nb
        for k in range(nb):
            ax[k] = bx[k]
            ay[k] = by[k]

    if na < 3:
        return 0.0
    acc = 0.0
    x0 = ax[na - 1]; y0 = ay[na - 1]
    for i in range(na):
        x1 = ax[i]; y1 = ay[i]
        acc += x0 * y1 - y0 * x1
        x0 = x1; y0 = y1
    return 0.5 * fabs(acc)


cdef double _pair_iou(double acx, double acy, double aw, double ah, double at,
                      double bcx, double bcy, double bw, double bh, double bt) noexcept nogil:
    cdef double axs[4]
    cdef double ays[4]
    cdef double bxs[4]
    cdef double bys[4]
    cdef double inter, union_, v
    _corners(acx, acy, aw, ah, at, axs, ays)
    _corners(bcx, bcy, bw, bh, bt, bxs, bys)
    inter = _clip_area(axs, ays, bxs, bys)
    if inter < _AREA_EPS:
        return 0.0
    union_ = aw * ah + bw * bh - inter
    v = inter / union_
    if v < 0.0:
        return 0.0
    if v > 1.0:
        return 1.0
    return v


def rbox_iou_single(double acx, double acy, double aw, double ah, double at,
                    double bcx, double bcy, double bw, double bh, double bt):
    """IoU of two rotated boxes given as (cx, cy, w, h, theta) scalars."""
    return _pair_iou(acx, acy, aw, ah, at, bcx, bcy, bw, bh, bt)


def rbox_iou_pairs(a, b):
    """Elementwise IoU of aligned (n, 5) arrays of boxes."""
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    if av.shape[0] != bv.shape[0] or av.shape[1] != 5 or bv.shape[1] != 5:
        raise ValueError("expected matching (n, 5) arrays")
    out = np.empty(av.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(av.shape[0]):
            ov[i] = _pair_iou(av[i, 0], av[i, 1], av[i, 2], av[i, 3], av[i, 4],
                              bv[i, 0], bv[i, 1], bv[i, 2], bv[i, 3], bv[i, 4])
    return out


def rbox_iou_matrix(a, b):
    """All-pairs IoU: (n, 5) x (m, 5) -> (n, m)."""
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    if av.shape[1] != 5 or bv.shape[1] != 5:
        raise ValueError("expected (n, 5) and (m, 5) arrays")
    out = np.empty((av.shape[0], bv.shape[0]), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(av.shape[0]):
            for j in range(bv.shape[0]):
                ov[i, j] = _pair_iou(
                    av[i, 0], av[i, 1], av[i, 2], av[i, 3], av[i, 4],
                    bv[j, 0], bv[j, 1], bv[j, 2], bv[j, 3], bv[j, 4])
    return out
