"""Exact rotated-box geometry.

Conventions, used everywhere in this package:

* ``RBox(cx, cy, w, h, theta)`` is a rectangle centred at ``(cx, cy)``
  whose ``w`` edge points along direction ``theta`` (radians) and whose
  ``h`` edge is perpendicular to it.
* Angles live in ``[-pi/2, pi/2)``; a box is invariant under
  ``theta -> theta + pi`` and under the representation swap
  ``(w, h, theta) -> (h, w, theta + pi/2)``.
* Coordinates are plain mathematical x/y (y up); polygons are
  counter-clockwise with nonnegative shoelace area.

Everything here is a pure function over immutable values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .kernels import rbox_iou_single

__all__ = [
    "RBox",
    "HBox",
    "ViewRotation",
    "Polygon",
    "angle_normalize",
    "rotate_point",
    "rotate_rbox",
    "circumscribed_hbox",
    "symmetric_rbox",
    "rbox_corners",
    "hbox_iou",
    "rbox_iou",
]

_AREA_EPS = 1e-12  # clipped intersections below this count as empty


def angle_normalize(theta: float) -> float:
    """Fold an angle into ``[-pi/2, pi/2)`` modulo pi."""
    if not math.isfinite(theta):
        raise ValueError(f"angle must be finite, got {theta!r}")
    t = (theta + math.pi / 2.0) % math.pi - math.pi / 2.0
    # float fold can land exactly on +pi/2 for inputs a hair below a period
    if t >= math.pi / 2.0:
        t = -math.pi / 2.0
    return t


def _check_finite_positive(name: str, w: float, h: float) -> None:
    if not (math.isfinite(w) and math.isfinite(h) and w > 0 and h > 0):
        raise ValueError(f"{name} requires finite positive sides, got w={w!r} h={h!r}")


@dataclass(frozen=True, slots=True)
class RBox:
    """Rotated box ``(cx, cy, w, h, theta)``; theta normalized on construction."""

    cx: float
    cy: float
    w: float
    h: float
    theta: float

    def __post_init__(self):
        _check_finite_positive("RBox", self.w, self.h)
        if not (math.isfinite(self.cx) and math.isfinite(self.cy)):
            raise ValueError("RBox centre must be finite")
        object.__setattr__(self, "theta", angle_normalize(self.theta))

    @property
    def center(self) -> tuple[float, float]:
        return (self.cx, self.cy)

    def swapped(self) -> "RBox":
        """The equivalent representation ``(h, w, theta + pi/2)``."""
        return RBox(self.cx, self.cy, self.h, self.w, self.theta + math.pi / 2.0)

    def canonical(self) -> "RBox":
        """Representation with ``w >= h`` (ties keep the current one)."""
        return self if self.w >= self.h else self.swapped()

    def to_json_dict(self) -> dict:
        return {"cx": self.cx, "cy": self.cy, "w": self.w, "h": self.h,
                "theta": self.theta}

    @classmethod
    def from_json_dict(cls, d: dict) -> "RBox":
        return cls(d["cx"], d["cy"], d["w"], d["h"], d["theta"])


@dataclass(frozen=True, slots=True)
class HBox:
    """Axis-aligned box stored as centre + size, mirroring :class:`RBox`."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        _check_finite_positive("HBox", self.w, self.h)
        if not (math.isfinite(self.cx) and math.isfinite(self.cy)):
            raise ValueError("HBox centre must be finite")

    @property
    def x1(self) -> float:
        return self.cx - self.w / 2.0

    @property
    def y1(self) -> float:
        return self.cy - self.h / 2.0

    @property
    def x2(self) -> float:
        return self.cx + self.w / 2.0

    @property
    def y2(self) -> float:
        return self.cy + self.h / 2.0

    def to_xyxy(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    @classmethod
    def from_xyxy(cls, x1: float, y1: float, x2: float, y2: float) -> "HBox":
        return cls((x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1)

    def as_rbox(self) -> RBox:
        return RBox(self.cx, self.cy, self.w, self.h, 0.0)

    def to_json_dict(self) -> dict:
        return {"cx": self.cx, "cy": self.cy, "w": self.w, "h": self.h}

    @classmethod
    def from_json_dict(cls, d: dict) -> "HBox":
        return cls(d["cx"], d["cy"], d["w"], d["h"])


@dataclass(frozen=True, slots=True)
class ViewRotation:
    """Rotation by ``delta_theta`` about a fixed centre (the scene centre)."""

    delta_theta: float
    center: tuple[float, float]

    def __post_init__(self):
        if not math.isfinite(self.delta_theta):
            raise ValueError("delta_theta must be finite")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.delta_theta), math.sin(self.delta_theta)
        return np.array([[c, -s], [s, c]])

    def inverse(self) -> "ViewRotation":
        return ViewRotation(-self.delta_theta, self.center)


class Polygon:
    """Convex counter-clockwise polygon (thin wrapper over an (n, 2) array)."""

    __slots__ = ("vertices",)

    def __init__(self, vertices):
        arr = np.asarray(vertices, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("Polygon expects an (n, 2) array of vertices")
        self.vertices = arr
        self.vertices.setflags(write=False)

    def __len__(self) -> int:
        return len(self.vertices)

    def area(self) -> float:
        """Shoelace area; nonnegative for counter-clockwise input."""
        x = self.vertices[:, 0]
        y = self.vertices[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    def centroid(self) -> tuple[float, float]:
        c = self.vertices.mean(axis=0)
        return (float(c[0]), float(c[1]))


def rotate_point(p: tuple[float, float], v: ViewRotation) -> tuple[float, float]:
    """Rotate a point about the view centre."""
    c, s = math.cos(v.delta_theta), math.sin(v.delta_theta)
    xc, yc = v.center
    dx, dy = p[0] - xc, p[1] - yc
    return (xc + c * dx - s * dy, yc + s * dx + c * dy)


def rotate_rbox(b: RBox, v: ViewRotation) -> RBox:
    """Rotate a box about the view centre: centre moves, sizes stay,
    angle advances by ``delta_theta`` (renormalized)."""
    nx, ny = rotate_point(b.center, v)
    return RBox(nx, ny, b.w, b.h, b.theta + v.delta_theta)


def circumscribed_hbox(b: RBox) -> HBox:
    """Smallest axis-aligned box containing ``b`` (same centre)."""
    c, s = abs(math.cos(b.theta)), abs(math.sin(b.theta))
    return HBox(b.cx, b.cy, b.w * c + b.h * s, b.w * s + b.h * c)


def symmetric_rbox(b: RBox) -> RBox:
    """Mirror twin sharing centre, sizes and circumscribed box: theta -> -theta."""
    return RBox(b.cx, b.cy, b.w, b.h, math.pi - b.theta)


def rbox_corners(b: RBox) -> Polygon:
    """Corner polygon, counter-clockwise starting from the (-w/2, -h/2) corner."""
    c, s = math.cos(b.theta), math.sin(b.theta)
    hw, hh = b.w / 2.0, b.h / 2.0
    pts = []
    for ox, oy in ((-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)):
        pts.append((b.cx + c * ox - s * oy, b.cy + s * ox + c * oy))
    return Polygon(pts)


def hbox_iou(a: HBox, b: HBox) -> float:
    """Intersection over union of two axis-aligned boxes."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.w * a.h + b.w * b.h - inter
    return inter / union


def rbox_iou(a: RBox, b: RBox) -> float:
    """Rotated IoU via convex polygon clipping (compiled kernel when available).

    Intersections with area below 1e-12 are reported as 0.
    """
    v = rbox_iou_single(a.cx, a.cy, a.w, a.h, a.theta,
                        b.cx, b.cy, b.w, b.h, b.theta)
    return float(v)


def rbox_to_json(b: RBox) -> str:
    return json.dumps(b.to_json_dict())


def rbox_from_json(s: str) -> RBox:
    return RBox.from_json_dict(json.loads(s))
