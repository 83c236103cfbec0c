"""Loss family for horizontal-box-supervised rotated-box learning.

Weakly-supervised side: focal classification, centre-ness cross-entropy,
and circumscribed-rectangle IoU regression.  Self-supervised side: an L1
centre term plus a boundary-aware size/angle term that takes the minimum
over the two box representations, absorbing angle periodicity and edge
exchange.  The total is ``ws + lambda * ss``.

All functions are pure; batch reductions run in input order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .geometry import HBox, RBox, circumscribed_hbox, hbox_iou

__all__ = [
    "LossWeights",
    "Prediction",
    "Target",
    "WSLossResult",
    "SSLossResult",
    "iou_reg_loss",
    "focal_loss",
    "centerness_loss",
    "ws_loss",
    "l_xy",
    "l_wh_theta",
    "ss_reg_loss",
    "ss_loss",
    "total_loss",
    "breakdown_json_dict",
]

PROB_CLAMP = 1e-7   # probability clamp bound
IOU_FLOOR = 1e-6    # floors -log(IoU) at ~13.8 instead of +inf
CN_NORM_FLOOR = 1e-6


@dataclass(frozen=True)
class LossWeights:
    """Loss mixing weights; defaults follow the reference configuration."""

    mu1: float = 1.0
    mu2: float = 1.0
    mu3: float = 1.0
    gamma1: float = 0.15
    gamma2: float = 1.0
    lam: float = 0.4

    def __post_init__(self):
        for name in ("mu1", "mu2", "mu3", "gamma1", "gamma2", "lam"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def to_json_dict(self) -> dict:
        return {"mu1": self.mu1, "mu2": self.mu2, "mu3": self.mu3,
                "gamma1": self.gamma1, "gamma2": self.gamma2,
                "lambda": self.lam}

    @classmethod
    def from_json_dict(cls, d: dict) -> "LossWeights":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return cls(**d)


@dataclass(frozen=True)
class Prediction:
    """Per-location detector output: box, class probabilities, centre-ness."""

    location: tuple[float, float]
    rbox: RBox
    class_probs: tuple[float, ...]
    centerness: float


@dataclass(frozen=True)
class Target:
    """Per-location assignment; ``class_id`` 0 means background."""

    class_id: int
    centerness: float
    gt_hbox: HBox | None = None
    target_rbox: RBox | None = None
    valid: bool = True


@dataclass(frozen=True)
class WSLossResult:
    total: float
    cls: float
    cn: float
    reg: float
    n_pos: int
    empty_positives: bool


@dataclass(frozen=True)
class SSLossResult:
    total: float
    n_pos: int
    empty_positives: bool


def _clamp_prob(p: float) -> float:
    return min(max(p, PROB_CLAMP), 1.0 - PROB_CLAMP)


def iou_reg_loss(pred: HBox, gt: HBox, kind: str = "log") -> float:
    """IoU regression loss between axis-aligned boxes.

    ``"log"`` is ``-ln(IoU)`` (floored at IOU_FLOOR); ``"linear"`` is
    ``1 - IoU``, available for sensitivity studies.
    """
    iou = hbox_iou(pred, gt)
    if kind == "log":
        return -math.log(max(iou, IOU_FLOOR))
    if kind == "linear":
        return 1.0 - iou
    raise ValueError(f"unknown iou loss kind {kind!r}")


def focal_loss(p: float, is_positive: bool, alpha: float = 0.25,
               gamma: float = 2.0) -> float:
    """Focal classification loss for one class probability."""
    p = _clamp_prob(p)
    if is_positive:
        return -alpha * (1.0 - p) ** gamma * math.log(p)
    return -(1.0 - alpha) * p ** gamma * math.log(1.0 - p)


def centerness_loss(cn_pred: float, cn_target: float) -> float:
    """Binary cross-entropy with a soft target."""
    p = _clamp_prob(cn_pred)
    t = min(max(cn_target, 0.0), 1.0)
    return -(t * math.log(p) + (1.0 - t) * math.log(1.0 - p))


def ws_loss(preds: Sequence[Prediction], targets: Sequence[Target],
            w: LossWeights, alpha: float = 0.25, gamma: float = 2.0,
            iou_kind: str = "log") -> WSLossResult:
    """Weakly-supervised branch loss.

    Classification and centre-ness average over positives (count floored
    at one); the regression term compares each positive's circumscribed
    rectangle with its horizontal ground-truth box, weighted by target
    centre-ness and normalized by the positive centre-ness mass.
    Invalid targets are excluded from every sum.
    """
    if len(preds) != len(targets):
        raise ValueError("preds and targets must align")
    pairs = [(p, t) for p, t in zip(preds, targets) if t.valid]

    n_pos = sum(1 for _, t in pairs if t.class_id > 0)
    empty = n_pos == 0
    norm_pos = max(n_pos, 1)

    cls_sum = 0.0
    cn_sum = 0.0
    reg_sum = 0.0
    cn_mass = 0.0
    for p, t in pairs:
        for k, pk in enumerate(p.class_probs, start=1):
            cls_sum += focal_loss(pk, t.class_id == k, alpha, gamma)
        cn_sum += centerness_loss(p.centerness, t.centerness)
        if t.class_id > 0:
            if t.gt_hbox is None:
                raise ValueError("positive target missing gt_hbox")
            reg_sum += t.centerness * iou_reg_loss(
                circumscribed_hbox(p.rbox), t.gt_hbox, iou_kind)
            cn_mass += t.centerness

    cls_term = w.mu1 * cls_sum / norm_pos
    cn_term = w.mu2 * cn_sum / norm_pos
    reg_term = w.mu3 * reg_sum / max(cn_mass, CN_NORM_FLOOR)
    return WSLossResult(
        total=cls_term + cn_term + reg_term,
        cls=cls_term, cn=cn_term, reg=reg_term,
        n_pos=n_pos, empty_positives=empty,
    )


def l_xy(a: RBox, b: RBox) -> float:
    """L1 distance between box centres."""
    return abs(a.cx - b.cx) + abs(a.cy - b.cy)


def _centered_iou_loss(w1: float, h1: float, w2: float, h2: float) -> float:
    # both boxes have corner form (-w, -h, w, h), i.e. share the origin
    inter = 4.0 * min(w1, w2) * min(h1, h2)
    union = 4.0 * (w1 * h1 + w2 * h2) - inter
    return -math.log(max(inter / union, IOU_FLOOR))


def l_wh_theta(a: RBox, b: RBox) -> float:
    """Boundary-aware size/angle consistency between a target box ``a``
    and a prediction ``b``.

    Minimum over the direct and edge-swapped hypotheses; the angle
    penalty switches between |sin| and |cos| so the value is continuous
    across the +-pi/2 representation wrap.
    """
    d = a.theta - b.theta
    direct = _centered_iou_loss(a.w, a.h, b.w, b.h) + abs(math.sin(d))
    swapped = _centered_iou_loss(a.w, a.h, b.h, b.w) + abs(math.cos(d))
    return min(direct, swapped)


def ss_reg_loss(a: RBox, b: RBox, w: LossWeights) -> float:
    """Consistency regression between the transformed target and the
    second-view prediction: gamma1 * centre L1 + gamma2 * size/angle."""
    return w.gamma1 * l_xy(a, b) + w.gamma2 * l_wh_theta(a, b)


def ss_loss(pairs: Sequence[tuple[Target, Prediction]],
            w: LossWeights) -> SSLossResult:
    """Self-supervised branch loss: centre-ness-weighted mean of
    :func:`ss_reg_loss` over valid positives."""
    acc = 0.0
    mass = 0.0
    n_pos = 0
    for t, p in pairs:
        if not t.valid or t.class_id <= 0:
            continue
        if t.target_rbox is None:
            raise ValueError("SS pair missing target rbox")
        n_pos += 1
        acc += t.centerness * ss_reg_loss(t.target_rbox, p.rbox, w)
        mass += t.centerness
    if n_pos == 0:
        return SSLossResult(total=0.0, n_pos=0, empty_positives=True)
    return SSLossResult(total=acc / max(mass, CN_NORM_FLOOR), n_pos=n_pos,
                        empty_positives=False)


def total_loss(ws: float, ss: float, w: LossWeights) -> float:
    """Weighted sum of the two branches."""
    return ws + w.lam * ss


def breakdown_json_dict(ws: WSLossResult, ss: SSLossResult,
                        w: LossWeights) -> dict:
    return {
        "ws": {"cls": ws.cls, "cn": ws.cn, "reg": ws.reg},
        "ss": ss.total,
        "total": total_loss(ws.total, ss.total, w),
        "weights": w.to_json_dict(),
    }
