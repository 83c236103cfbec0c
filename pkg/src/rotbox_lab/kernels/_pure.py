"""Pure-Python twin of the compiled clipping kernels.

Keep this file and ``_core.pyx`` in lockstep: same corner order, same
inside test (>= 0, counter-clockwise interiors), same intersection
formula, so values match the compiled backend to float precision.
"""

from __future__ import annotations

import math

import numpy as np

_AREA_EPS = 1e-12


def _corners(cx, cy, w, h, t):
    c = math.cos(t)
    s = math.sin(t)
    hw = 0.5 * w
    hh = 0.5 * h
    return [
        (cx + c * (-hw) - s * (-hh), cy + s * (-hw) + c * (-hh)),
        (cx + c * hw - s * (-hh), cy + s * hw + c * (-hh)),
        (cx + c * hw - s * hh, cy + s * hw + c * hh),
        (cx + c * (-hw) - s * hh, cy + s * (-hw) + c * hh),
    ]


def _clip_area(subject, clipper):
    """Area of ``subject`` clipped by the convex CCW ``clipper``."""
    out = subject
    for i in range(4):
        if not out:
            return 0.0
        e1x, e1y = clipper[i]
        e2x, e2y = clipper[(i + 1) % 4]
        inp = out
        out = []
        sx, sy = inp[-1]
        s_in = (e2x - e1x) * (sy - e1y) - (e2y - e1y) * (sx - e1x) >= 0.0
        for px, py in inp:
            p_in = (e2x - e1x) * (py - e1y) - (e2y - e1y) * (px - e1x) >= 0.0
            if p_in != s_in:
                den = (e1x - e2x) * (sy - py) - (e1y - e2y) * (sx - px)
                n1 = e1x * e2y - e1y * e2x
                n2 = sx * py - sy * px
                out.append((
                    (n1 * (sx - px) - (e1x - e2x) * n2) / den,
                    (n1 * (sy - py) - (e1y - e2y) * n2) / den,
                ))
            if p_in:
                out.append((px, py))
            sx, sy, s_in = px, py, p_in
    if len(out) < 3:
        return 0.0
    acc = 0.0
    x0, y0 = out[-1]
    for x1, y1 in out:
        acc += x0 * y1 - y0 * x1
        x0, y0 = x1, y1
    return 0.5 * abs(acc)


def rbox_iou_single(acx, acy, aw, ah, at, bcx, bcy, bw, bh, bt):
    """IoU of two rotated boxes given as (cx, cy, w, h, theta) scalars."""
    inter = _clip_area(_corners(acx, acy, aw, ah, at),
                       _corners(bcx, bcy, bw, bh, bt))
    if inter < _AREA_EPS:
        return 0.0
    union = aw * ah + bw * bh - inter
    v = inter / union
    if v < 0.0:
        return 0.0
    if v > 1.0:
        return 1.0
    return v


def rbox_iou_pairs(a, b):
    """Elementwise IoU of aligned (n, 5) arrays of boxes."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] != 5:
        raise ValueError("expected matching (n, 5) arrays")
    out = np.empty(a.shape[0], dtype=np.float64)
    for i in range(a.shape[0]):
        out[i] = rbox_iou_single(a[i, 0], a[i, 1], a[i, 2], a[i, 3], a[i, 4],
                                 b[i, 0], b[i, 1], b[i, 2], b[i, 3], b[i, 4])
    return out


def rbox_iou_matrix(a, b):
    """All-pairs IoU: (n, 5) x (m, 5) -> (n, m)."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != 5 or b.shape[1] != 5:
        raise ValueError("expected (n, 5) and (m, 5) arrays")
    out = np.empty((a.shape[0], b.shape[0]), dtype=np.float64)
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            out[i, j] = rbox_iou_single(
                a[i, 0], a[i, 1], a[i, 2], a[i, 3], a[i, 4],
                b[j, 0], b[j, 1], b[j, 2], b[j, 3], b[j, 4])
    return out
