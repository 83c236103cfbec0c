"""Independent numerical oracles used by the self-check suites and tests.

These deliberately avoid the code paths they verify: the IoU oracle is
point sampling (no clipping), the gradient oracle is central finite
differences (no analytic derivatives).
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import RBox, rbox_corners

__all__ = ["mc_rbox_iou", "fd_gradient", "random_box_pair"]


def _points_in_rbox(xs: np.ndarray, ys: np.ndarray, b: RBox) -> np.ndarray:
    c, s = math.cos(b.theta), math.sin(b.theta)
    dx = xs - b.cx
    dy = ys - b.cy
    u = c * dx + s * dy  # coordinate along the w edge
    v = -s * dx + c * dy
    return (np.abs(u) <= b.w / 2.0) & (np.abs(v) <= b.h / 2.0)


def mc_rbox_iou(a: RBox, b: RBox, n_samples: int = 1_000_000,
                seed: int = 0) -> float:
    """Monte-Carlo IoU: uniform samples over the pair's joint bounding box."""
    ca = rbox_corners(a).vertices
    cb = rbox_corners(b).vertices
    xs_all = np.concatenate([ca[:, 0], cb[:, 0]])
    ys_all = np.concatenate([ca[:, 1], cb[:, 1]])
    x0, x1 = xs_all.min(), xs_all.max()
    y0, y1 = ys_all.min(), ys_all.max()

    rng = np.random.default_rng(seed)
    xs = rng.uniform(x0, x1, n_samples)
    ys = rng.uniform(y0, y1, n_samples)
    in_a = _points_in_rbox(xs, ys, a)
    in_b = _points_in_rbox(xs, ys, b)
    union = int(np.count_nonzero(in_a | in_b))
    if union == 0:
        return 0.0
    inter = int(np.count_nonzero(in_a & in_b))
    return inter / union


def fd_gradient(f, x: np.ndarray, rel_step: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of a flat vector."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def random_box_pair(rng: np.random.Generator, span: float = 20.0,
                    min_side: float = 0.5, max_side: float = 8.0
                    ) -> tuple[RBox, RBox]:
    """A random box pair biased towards partial overlap (offset within the
    first box's extent), the interesting regime for IoU checks."""
    cx, cy = rng.uniform(-span, span, 2)
    w1, h1 = rng.uniform(min_side, max_side, 2)
    t1 = rng.uniform(-math.pi / 2, math.pi / 2)
    a = RBox(cx, cy, w1, h1, t1)
    w2, h2 = rng.uniform(min_side, max_side, 2)
    t2 = rng.uniform(-math.pi / 2, math.pi / 2)
    off = rng.uniform(-0.7, 0.7, 2) * np.array([max(w1, w2), max(h1, h2)])
    b = RBox(cx + off[0], cy + off[1], w2, h2, t2)
    return a, b
