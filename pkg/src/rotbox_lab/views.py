"""Augmented-view generation and label re-assignment.

View 1 is the scene as-is; view 2 rotates it about the scene centre by a
known angle.  Because rotating a square canvas exposes border regions,
two leakage-avoidance modes exist:

* ``CROP``: both views are restricted to the centred square of side
  ``sqrt(2)/2 * side`` (the largest crop valid for any rotation) and
  objects leaving it in either view are filtered from both.
* ``PAD``: the full canvas is kept; an object whose rotated centre lands
  outside the canvas is flagged invalid and excluded from every loss.

Circular (isotropic) objects do not co-rotate: their observable box in
view 2 keeps angle zero, only the centre moves.

Re-assignment builds per-location targets for the second view from
first-view predictions: one-to-one keeps each object's own prediction;
one-to-many picks, per object, the candidate prediction whose location
is nearest to the object's horizontal-box centre (ties by lowest index).
Targets are built from predictions, horizontal boxes and validity masks
only, so they cannot encode ground-truth angles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import HBox, RBox, ViewRotation, rotate_point, rotate_rbox
from .losses import Prediction, Target
from .scenes import SceneObject, SceneSpec

__all__ = [
    "CROP",
    "PAD",
    "CROP_SIDE_FACTOR",
    "ViewPair",
    "rotate_scene_object",
    "generate_view_pair",
    "transform_target",
    "reassign_o2o",
    "reassign_o2m",
    "o2m_source_indices",
    "sample_delta_theta",
]

CROP = "crop"
PAD = "pad"
CROP_SIDE_FACTOR = math.sqrt(2.0) / 2.0

# delta-theta exclusion half-widths: around 0 the angle constraint
# vanishes; around multiples of pi/2 the mirrored box aliases with the
# rotated one
DTHETA_EXCLUDE = math.radians(2.0)


@dataclass(frozen=True)
class ViewPair:
    view1: tuple[SceneObject, ...]
    view2: tuple[SceneObject, ...]
    valid_mask: tuple[bool, ...]
    mode: str
    rotation: ViewRotation

    def __post_init__(self):
        if len(self.view1) != len(self.view2) or len(self.view1) != len(self.valid_mask):
            raise ValueError("view lists and mask must align")


def rotate_scene_object(obj: SceneObject, v: ViewRotation) -> SceneObject:
    """Ground truth of an object as observed in the rotated view."""
    if obj.circular:
        # a disk's footprint box does not co-rotate
        nx, ny = rotate_point(obj.gt_rbox.center, v)
        box = RBox(nx, ny, obj.gt_rbox.w, obj.gt_rbox.h, 0.0)
    else:
        box = rotate_rbox(obj.gt_rbox, v)
    return SceneObject(id=obj.id, gt_rbox=box, class_id=obj.class_id,
                       circular=obj.circular)


def _in_square(p: tuple[float, float], lo: float, hi: float) -> bool:
    return lo <= p[0] <= hi and lo <= p[1] <= hi


def generate_view_pair(scene: SceneSpec, delta_theta: float,
                       mode: str = PAD) -> ViewPair:
    """Build the two augmented views of a scene."""
    if not abs(delta_theta) < math.pi:
        raise ValueError("|delta_theta| must be < pi")
    if mode not in (CROP, PAD):
        raise ValueError(f"unknown mode {mode!r}")
    rot = ViewRotation(delta_theta, scene.center)

    view1 = []
    view2 = []
    valid = []
    if mode == CROP:
        half = CROP_SIDE_FACTOR * scene.side / 2.0
        lo = scene.side / 2.0 - half
        hi = scene.side / 2.0 + half
        for obj in scene.objects:
            robj = rotate_scene_object(obj, rot)
            if _in_square(obj.gt_rbox.center, lo, hi) and _in_square(robj.gt_rbox.center, lo, hi):
                view1.append(obj)
                view2.append(robj)
                valid.append(True)
    else:
        for obj in scene.objects:
            robj = rotate_scene_object(obj, rot)
            view1.append(obj)
            view2.append(robj)
            valid.append(_in_square(robj.gt_rbox.center, 0.0, scene.side))

    return ViewPair(view1=tuple(view1), view2=tuple(view2),
                    valid_mask=tuple(valid), mode=mode, rotation=rot)


def transform_target(rbox_ws: RBox, v: ViewRotation) -> RBox:
    """Carry a first-view predicted box into the rotated view (centre
    rotates, sizes persist, angle advances by the view rotation)."""
    return rotate_rbox(rbox_ws, v)


def reassign_o2o(ws_preds: Sequence[Prediction], pair: ViewPair) -> list[Target]:
    """One-to-one: each object's own first-view prediction becomes its
    second-view target; centre-ness, class and horizontal box are copied."""
    if len(ws_preds) != len(pair.view1):
        raise ValueError("need exactly one prediction per surviving object")
    targets = []
    for pred, obj, ok in zip(ws_preds, pair.view1, pair.valid_mask):
        targets.append(Target(
            class_id=obj.class_id,
            centerness=pred_target_centerness(pred),
            gt_hbox=_obj_hbox(obj),
            target_rbox=pred.rbox,
            valid=ok,
        ))
    return targets


def o2m_source_indices(cand_locations: np.ndarray,
                       gt_centers: np.ndarray) -> np.ndarray:
    """For each ground-truth centre, index of the nearest candidate
    location (Euclidean); exact ties resolve to the lowest index."""
    cand = np.asarray(cand_locations, dtype=float)
    gts = np.asarray(gt_centers, dtype=float)
    d2 = ((gts[:, None, :] - cand[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)  # argmin takes the first minimum


def reassign_o2m(ws_preds: Sequence[Prediction], gt_hboxes: Sequence[HBox],
                 pair: ViewPair) -> list[Target]:
    """One-to-many: per object, adopt the candidate prediction closest to
    the object's horizontal-box centre.  Candidates pool across objects,
    so a crowded neighbour's prediction can be captured."""
    if len(gt_hboxes) != len(pair.view1):
        raise ValueError("need one gt hbox per surviving object")
    if not ws_preds:
        raise ValueError("no candidate predictions")
    locs = np.array([p.location for p in ws_preds], dtype=float)
    centers = np.array([(hb.cx, hb.cy) for hb in gt_hboxes], dtype=float)
    src = o2m_source_indices(locs, centers)
    targets = []
    for i, (obj, ok) in enumerate(zip(pair.view1, pair.valid_mask)):
        chosen = ws_preds[int(src[i])]
        targets.append(Target(
            class_id=obj.class_id,
            centerness=pred_target_centerness(chosen),
            gt_hbox=gt_hboxes[i],
            target_rbox=chosen.rbox,
            valid=ok,
        ))
    return targets


def pred_target_centerness(pred: Prediction) -> float:
    # simulator locations sit at object centres, so the assigned quality
    # weight is the prediction's own centre-ness
    return pred.centerness


def _obj_hbox(obj: SceneObject) -> HBox:
    from .geometry import circumscribed_hbox

    return circumscribed_hbox(obj.gt_rbox)


def sample_delta_theta(rng: np.random.Generator,
                       exclude: float = DTHETA_EXCLUDE) -> float:
    """Uniform view rotation on [-pi, pi) avoiding bands around multiples
    of pi/2 (no-information and aliasing angles)."""
    while True:
        dt = rng.uniform(-math.pi, math.pi)
        rem = abs(dt) % (math.pi / 2.0)
        if min(rem, math.pi / 2.0 - rem) >= exclude:
            return dt
