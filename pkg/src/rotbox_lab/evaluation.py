"""Detection-style evaluation: rotated-IoU matching, average precision,
angle-error statistics.

Matching is greedy by descending score (stable tie-break by detection
index); each ground truth matches at most once and a match requires
rotated IoU at or above the threshold.  AP uses all-point
precision-recall interpolation.  The mean AP averages the thresholds
0.50:0.05:0.95.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import RBox, circumscribed_hbox
from .kernels import rbox_iou_matrix
from .recovery import RecoveryReport, angle_error
from .scenes import SceneObject

__all__ = [
    "Detection",
    "EvalResult",
    "AP_THRESHOLDS",
    "match_and_ap",
    "evaluate",
    "report_detections",
]

AP_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class Detection:
    rbox: RBox
    score: float
    class_id: int = 1

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("score must be in [0, 1]")

    def to_json_dict(self) -> dict:
        return {"rbox": self.rbox.to_json_dict(), "score": self.score,
                "class_id": self.class_id}

    @classmethod
    def from_json_dict(cls, d: dict) -> "Detection":
        return cls(rbox=RBox.from_json_dict(d["rbox"]), score=d["score"],
                   class_id=d.get("class_id", 1))


@dataclass
class EvalResult:
    ap: float
    ap50: float
    ap75: float
    per_class: dict[int, dict[str, float]]
    angle_errors_deg: list[float]
    angle_median_deg: float
    angle_p95_deg: float

    def to_json_dict(self) -> dict:
        return {
            "ap": self.ap, "ap50": self.ap50, "ap75": self.ap75,
            "per_class": {str(k): v for k, v in sorted(self.per_class.items())},
            "angle_median_deg": self.angle_median_deg,
            "angle_p95_deg": self.angle_p95_deg,
        }


def _boxes_array(boxes: list[RBox]) -> np.ndarray:
    return np.array([[b.cx, b.cy, b.w, b.h, b.theta] for b in boxes],
                    dtype=float).reshape(-1, 5)


def match_and_ap(dets: list[Detection], gts: list[SceneObject],
                 iou_thresh: float) -> float:
    """Average precision of one detection pool against one gt pool."""
    n_gt = len(gts)
    if n_gt == 0:
        return 0.0
    if not dets:
        return 0.0
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    iou = rbox_iou_matrix(_boxes_array([dets[i].rbox for i in order]),
                          _boxes_array([g.gt_rbox for g in gts]))
    gt_taken = np.zeros(n_gt, dtype=bool)
    tp = np.zeros(len(order))
    fp = np.zeros(len(order))
    for r, _ in enumerate(order):
        cand = np.where(~gt_taken, iou[r], -1.0)
        j = int(np.argmax(cand))
        if cand[j] >= iou_thresh:
            gt_taken[j] = True
            tp[r] = 1.0
        else:
            fp[r] = 1.0
    ctp = np.cumsum(tp)
    cfp = np.cumsum(fp)
    recall = ctp / n_gt
    precision = ctp / np.maximum(ctp + cfp, 1e-12)
    # all-point interpolation: envelope the precision, integrate over recall
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    idx = np.where(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[idx + 1] - mrec[idx]) * mpre[idx + 1]))


def _apply_s2(dets: list[Detection], circular_class_ids: set[int]
              ) -> list[Detection]:
    """Replace circular-class outputs by their circumscribed horizontal
    boxes (as axis-aligned rotated boxes)."""
    out = []
    for d in dets:
        if d.class_id in circular_class_ids:
            hb = circumscribed_hbox(d.rbox)
            out.append(Detection(rbox=hb.as_rbox(), score=d.score,
                                 class_id=d.class_id))
        else:
            out.append(d)
    return out


def evaluate(dets: list[Detection], gts: list[SceneObject],
             s2_circular: bool = False,
             thresholds: tuple[float, ...] = AP_THRESHOLDS) -> EvalResult:
    """Class-wise AP evaluation with optional circular-class substitution.

    Angle errors are collected from pairs matched at IoU 0.5.
    """
    circular_ids = {g.class_id for g in gts if g.circular}
    if s2_circular and circular_ids:
        dets = _apply_s2(dets, circular_ids)

    class_ids = sorted({g.class_id for g in gts})
    per_class: dict[int, dict[str, float]] = {}
    for cid in class_ids:
        cdets = [d for d in dets if d.class_id == cid]
        cgts = [g for g in gts if g.class_id == cid]
        aps = {t: match_and_ap(cdets, cgts, t) for t in thresholds}
        per_class[cid] = {
            "ap": float(np.mean(list(aps.values()))),
            "ap50": aps[0.5],
            "ap75": aps[0.75],
        }

    ap = float(np.mean([v["ap"] for v in per_class.values()]))
    ap50 = float(np.mean([v["ap50"] for v in per_class.values()]))
    ap75 = float(np.mean([v["ap75"] for v in per_class.values()]))

    angle_errors = _matched_angle_errors(dets, gts)
    return EvalResult(
        ap=ap, ap50=ap50, ap75=ap75, per_class=per_class,
        angle_errors_deg=angle_errors,
        angle_median_deg=float(np.median(angle_errors)) if angle_errors else float("nan"),
        angle_p95_deg=float(np.percentile(angle_errors, 95)) if angle_errors else float("nan"),
    )


def _matched_angle_errors(dets: list[Detection], gts: list[SceneObject],
                          iou_thresh: float = 0.5) -> list[float]:
    if not dets or not gts:
        return []
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    iou = rbox_iou_matrix(_boxes_array([dets[i].rbox for i in order]),
                          _boxes_array([g.gt_rbox for g in gts]))
    taken = np.zeros(len(gts), dtype=bool)
    errs = []
    for r, di in enumerate(order):
        cand = np.where(~taken, iou[r], -1.0)
        j = int(np.argmax(cand))
        if cand[j] >= iou_thresh and dets[di].class_id == gts[j].class_id:
            taken[j] = True
            errs.append(angle_error(dets[di].rbox, gts[j].gt_rbox))
    return errs


def report_detections(report: RecoveryReport,
                      scene_or_gts) -> list[Detection]:
    """Turn a recovery report into detections; confidence is a bounded
    transform of the per-object final loss."""
    objects = getattr(scene_or_gts, "objects", scene_or_gts)
    dets = []
    for box, outcome, obj in zip(report.pred_boxes, report.outcomes, objects):
        score = 1.0 / (1.0 + max(outcome.final_loss, 0.0))
        dets.append(Detection(rbox=box, score=min(score, 1.0),
                              class_id=obj.class_id))
    return dets
