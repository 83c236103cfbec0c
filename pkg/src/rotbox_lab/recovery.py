"""Gradient-descent recovery of rotated boxes from horizontal supervision.

The detector collapses to trainable per-object box parameters: a
first-view box per object plus, per sampled view slot, a second-view
box.  Each step draws a fresh view rotation, applies the weak
circumscribed-rectangle loss on view 1 (and, as the shared-backbone
proxy, on the view-2 prediction against the rotated ground-truth
horizontal box), applies the consistency loss between the transformed
first-view prediction and the second-view prediction, and descends.

Second-view parameters are stored in the scene frame; the slot's
prediction in the rotated frame is their image under the current view
rotation (a rotation-equivariant backbone proxy).  For circular objects
the predicted angle does not co-rotate: isotropic content gives the
second view no orientation cue.

With the consistency branch disabled, both the true box and its mirror
twin minimise the weak loss exactly, so angles cannot be recovered;
with it enabled the angle relation between views singles out the true
box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .geometry import RBox, angle_normalize, symmetric_rbox
from .kernels import rbox_iou_pairs
from .losses import IOU_FLOOR, LossWeights, PROB_CLAMP
from .scenes import SceneSpec
from .views import CROP, CROP_SIDE_FACTOR, PAD, o2m_source_indices

__all__ = [
    "RecoveryConfig",
    "ObjectOutcome",
    "RecoveryReport",
    "AblationRow",
    "run_recovery",
    "ablate",
    "angle_error",
    "is_flipped",
    "single_object_objective",
    "single_object_grad",
]

_MASS_EPS = 1e-6
_TIE_EPS = 1e-2   # probe-loss margin treated as a tie between starts


@dataclass(frozen=True)
class RecoveryConfig:
    """Experiment knobs.  Defaults reproduce the standard configuration."""

    weights: LossWeights = field(default_factory=LossWeights)
    steps: int = 800
    step_size: float = 0.08
    num_views: int = 1
    n_starts: int = 12
    resample_views: bool = False
    ss_enabled: bool = True
    ws_on_view2: bool = True
    assigner: str = "o2o"            # o2o | o2m
    border_mode: str = PAD           # pad | crop
    s1_mask_circular: bool = False
    s2_output_hbox_circular: bool = False
    stop_grad_target: bool = False   # True stops consistency gradient at the target
    seed: int = 0
    grad_mode: str = "analytic"      # analytic | fd
    init_mode: str = "hbox"          # hbox | symmetric
    init_angle_noise_deg: float = 5.0
    tau_flip_deg: float = 5.0
    lr_milestones: tuple[float, float] = (0.7, 0.9)
    lr_gamma: float = 0.1
    trace_every: int = 25
    dtheta_exclude_deg: float = 2.0
    o2m_candidates: int = 3
    o2m_jitter: float = 8.0

    def __post_init__(self):
        if self.steps <= 0 or self.num_views < 1 or self.step_size <= 0:
            raise ValueError("steps > 0, num_views >= 1, step_size > 0 required")
        if self.assigner not in ("o2o", "o2m"):
            raise ValueError(f"unknown assigner {self.assigner!r}")
        if self.border_mode not in (PAD, CROP):
            raise ValueError(f"unknown border mode {self.border_mode!r}")
        if self.grad_mode not in ("analytic", "fd"):
            raise ValueError(f"unknown grad mode {self.grad_mode!r}")
        if self.init_mode not in ("hbox", "symmetric"):
            raise ValueError(f"unknown init mode {self.init_mode!r}")

    def to_json_dict(self) -> dict:
        d = {
            "weights": self.weights.to_json_dict(),
            "steps": self.steps, "step_size": self.step_size,
            "num_views": self.num_views, "n_starts": self.n_starts,
            "resample_views": self.resample_views,
            "ss_enabled": self.ss_enabled,
            "ws_on_view2": self.ws_on_view2, "assigner": self.assigner,
            "border_mode": self.border_mode,
            "s1_mask_circular": self.s1_mask_circular,
            "s2_output_hbox_circular": self.s2_output_hbox_circular,
            "stop_grad_target": self.stop_grad_target,
            "seed": self.seed, "grad_mode": self.grad_mode,
            "init_mode": self.init_mode,
            "init_angle_noise_deg": self.init_angle_noise_deg,
            "tau_flip_deg": self.tau_flip_deg,
            "lr_milestones": list(self.lr_milestones),
            "lr_gamma": self.lr_gamma, "trace_every": self.trace_every,
            "dtheta_exclude_deg": self.dtheta_exclude_deg,
            "o2m_candidates": self.o2m_candidates,
            "o2m_jitter": self.o2m_jitter,
        }
        return d


@dataclass(frozen=True)
class ObjectOutcome:
    object_id: int
    gt_theta_deg: float
    pred_theta_deg: float
    angle_err_deg: float
    flipped: bool | None
    iou: float
    final_loss: float


@dataclass
class RecoveryReport:
    outcomes: list[ObjectOutcome]
    pred_boxes: list[RBox]
    median_angle_err_deg: float
    p95_angle_err_deg: float
    flip_fraction: float
    n_flip_defined: int
    diverged: bool
    loss_trace: list[float]
    trace_steps: list[int]
    per_object_trace: list[list[float]]
    breakdown: dict
    config: RecoveryConfig

    def summary_json_dict(self) -> dict:
        return {
            "n_objects": len(self.outcomes),
            "median_angle_err_deg": self.median_angle_err_deg,
            "p95_angle_err_deg": self.p95_angle_err_deg,
            "flip_fraction": self.flip_fraction,
            "n_flip_defined": self.n_flip_defined,
            "diverged": self.diverged,
            "loss": self.breakdown,
            "trace_steps": self.trace_steps,
            "loss_trace_thinned": [self.loss_trace[i] for i in self.trace_steps],
            "config": self.config.to_json_dict(),
        }


def angle_error(pred: RBox, gt: RBox) -> float:
    """Angle error in degrees, modulo representation: both boxes are
    brought to their long-side representation and the difference is
    folded into [0, 90]."""
    d = angle_normalize(pred.canonical().theta - gt.canonical().theta)
    return abs(math.degrees(d))


def is_flipped(pred: RBox, gt: RBox, tau: float = 5.0) -> bool | None:
    """Whether the prediction sits closer to the ground truth's mirror
    twin than to the ground truth.  Undefined (``None``) when the ground
    truth is within ``tau`` degrees of axis-aligned, where twin and truth
    coincide."""
    if abs(math.degrees(gt.canonical().theta)) <= tau:
        return None
    return angle_error(pred, symmetric_rbox(gt)) < angle_error(pred, gt)


# -- internal batched engine ------------------------------------------------

def _r2h_dims(w, h, t):
    c = np.cos(t)
    s = np.sin(t)
    ac, as_ = np.abs(c), np.abs(s)
    W = w * ac + h * as_
    H = w * as_ + h * ac
    return W, H


def _r2h_dims_grad(w, h, t):
    c = np.cos(t)
    s = np.sin(t)
    ac, as_ = np.abs(c), np.abs(s)
    sc, ss = np.sign(c), np.sign(s)
    W = w * ac + h * as_
    H = w * as_ + h * ac
    dW = (ac, as_, -w * sc * s + h * ss * c)   # d/dw, d/dh, d/dtheta
    dH = (as_, ac, w * ss * c - h * sc * s)
    return W, H, dW, dH


def _hbox_log_iou(pcx, pcy, pW, pH, gcx, gcy, gW, gH, want_grad):
    """-log IoU of axis-aligned boxes; gradients wrt the first box."""
    ax1, ax2 = pcx - pW / 2, pcx + pW / 2
    ay1, ay2 = pcy - pH / 2, pcy + pH / 2
    bx1, bx2 = gcx - gW / 2, gcx + gW / 2
    by1, by2 = gcy - gH / 2, gcy + gH / 2
    ix = np.minimum(ax2, bx2) - np.maximum(ax1, bx1)
    iy = np.minimum(ay2, by2) - np.maximum(ay1, by1)
    pos = (ix > 0) & (iy > 0)
    ixp = np.where(pos, ix, 0.0)
    iyp = np.where(pos, iy, 0.0)
    inter = ixp * iyp
    ap = pW * pH
    union = ap + gW * gH - inter
    iou = np.where(pos, inter / union, 0.0)
    above = iou > IOU_FLOOR
    loss = -np.log(np.maximum(iou, IOU_FLOOR))
    if not want_grad:
        return loss, None
    # d(-log iou)/dX = dU/dX / U - dI/dX / I  (zero below the floor)
    live = pos & above
    hi_x = (ax2 < bx2) & live
    lo_x = (ax1 > bx1) & live
    hi_y = (ay2 < by2) & live
    lo_y = (ay1 > by1) & live
    dix_dcx = hi_x.astype(float) - lo_x.astype(float)
    dix_dW = 0.5 * (hi_x.astype(float) + lo_x.astype(float))
    diy_dcy = hi_y.astype(float) - lo_y.astype(float)
    diy_dH = 0.5 * (hi_y.astype(float) + lo_y.astype(float))
    i_safe = np.where(live, inter, 1.0)
    u_safe = np.where(live, union, 1.0)

    def comb(dI, dAp):
        dU = dAp - dI
        return np.where(live, dU / u_safe - dI / i_safe, 0.0)

    g_cx = comb(iyp * dix_dcx, 0.0)
    g_cy = comb(ixp * diy_dcy, 0.0)
    g_W = comb(iyp * dix_dW, pH)
    g_H = comb(ixp * diy_dH, pW)
    return loss, (g_cx, g_cy, g_W, g_H)


def _centered_log_iou(w1, h1, w2, h2, want_grad):
    """-log IoU of origin-centred boxes with half-sides (w, h);
    gradients wrt all four half-sides."""
    mw = np.minimum(w1, w2)
    mh = np.minimum(h1, h2)
    inter = mw * mh
    union = w1 * h1 + w2 * h2 - inter
    iou = inter / union
    above = iou > IOU_FLOOR
    loss = -np.log(np.maximum(iou, IOU_FLOOR))
    if not want_grad:
        return loss, None
    w1m = (w1 < w2).astype(float)
    h1m = (h1 < h2).astype(float)
    dI = (w1m * mh, h1m * mw, (1.0 - w1m) * mh, (1.0 - h1m) * mw)
    dA = (h1, w1, h2, w2)
    i_safe = np.where(above, inter, 1.0)
    u_safe = np.where(above, union, 1.0)
    # d(-log iou)/dX = dU/dX / U - dI/dX / I with dU = dA - dI
    grads = tuple(np.where(above, (da - di) / u_safe - di / i_safe, 0.0)
                  for di, da in zip(dI, dA))
    return loss, grads


@dataclass
class _SceneArrays:
    gt: np.ndarray          # (N, 5)
    circ: np.ndarray        # (N,) bool
    class_ids: np.ndarray   # (N,) int
    hbox1: np.ndarray       # (N, 4): cx, cy, W, H
    side: float
    center: np.ndarray      # (2,)

    @classmethod
    def from_scene(cls, scene: SceneSpec) -> "_SceneArrays":
        n = len(scene.objects)
        gt = np.empty((n, 5))
        circ = np.empty(n, dtype=bool)
        cid = np.empty(n, dtype=int)
        for i, o in enumerate(scene.objects):
            b = o.gt_rbox
            gt[i] = (b.cx, b.cy, b.w, b.h, b.theta)
            circ[i] = o.circular
            cid[i] = o.class_id
        W, H = _r2h_dims(gt[:, 2], gt[:, 3], gt[:, 4])
        hbox1 = np.column_stack([gt[:, 0], gt[:, 1], W, H])
        return cls(gt=gt, circ=circ, class_ids=cid, hbox1=hbox1,
                   side=scene.side, center=np.array(scene.center))


def _rotate_centers(xy: np.ndarray, dtheta: float, center: np.ndarray) -> np.ndarray:
    c, s = math.cos(dtheta), math.sin(dtheta)
    d = xy - center
    return np.column_stack([center[0] + c * d[:, 0] - s * d[:, 1],
                            center[1] + s * d[:, 0] + c * d[:, 1]])


def _step_masks(sa: _SceneArrays, dthetas: np.ndarray,
                border_mode: str) -> tuple[np.ndarray, np.ndarray]:
    """(m1 (N,), m2 (K, N)) participation masks for the current step."""
    n = sa.gt.shape[0]
    k = len(dthetas)
    m2 = np.empty((k, n), dtype=bool)
    if border_mode == CROP:
        half = CROP_SIDE_FACTOR * sa.side / 2.0
        lo, hi = sa.side / 2.0 - half, sa.side / 2.0 + half
        in1 = ((sa.gt[:, 0] >= lo) & (sa.gt[:, 0] <= hi)
               & (sa.gt[:, 1] >= lo) & (sa.gt[:, 1] <= hi))
        for j, dt in enumerate(dthetas):
            rc = _rotate_centers(sa.gt[:, :2], dt, sa.center)
            in2 = ((rc[:, 0] >= lo) & (rc[:, 0] <= hi)
                   & (rc[:, 1] >= lo) & (rc[:, 1] <= hi))
            m2[j] = in1 & in2
        m1 = m2.any(axis=0)
    else:
        for j, dt in enumerate(dthetas):
            rc = _rotate_centers(sa.gt[:, :2], dt, sa.center)
            m2[j] = ((rc[:, 0] >= 0.0) & (rc[:, 0] <= sa.side)
                     & (rc[:, 1] >= 0.0) & (rc[:, 1] <= sa.side))
        m1 = np.ones(n, dtype=bool)
    return m1, m2


def _view2_gt_hbox(sa: _SceneArrays, dtheta: float) -> np.ndarray:
    """Rotated-view ground-truth horizontal boxes (cx, cy, W, H)."""
    rc = _rotate_centers(sa.gt[:, :2], dtheta, sa.center)
    t2 = np.where(sa.circ, sa.gt[:, 4], sa.gt[:, 4] + dtheta)
    W, H = _r2h_dims(sa.gt[:, 2], sa.gt[:, 3], t2)
    return np.column_stack([rc, W, H])


def _parts(ws: np.ndarray, ss: np.ndarray, sa: _SceneArrays,
           dthetas: np.ndarray, src: np.ndarray, want_grad: bool,
           gamma1: float = 0.15, gamma2: float = 1.0):
    """Raw per-object loss parts and (optionally) their gradients.

    Returns dict with ``a`` (N,), ``c`` (K, N), ``b`` (K, N) and, with
    gradients, ``ga_ws`` (N, 5), ``gc_ss`` (K, N, 5), ``gb_src`` (K, N, 5)
    (consistency gradient wrt the *source* first-view parameters) and
    ``gb_ss`` (K, N, 5).
    """
    n = ws.shape[0]
    kk = ss.shape[0]

    # view-1 anchor on the first-view parameters
    W1, H1, dW1, dH1 = _r2h_dims_grad(ws[:, 2], ws[:, 3], ws[:, 4])
    a, ga = _hbox_log_iou(ws[:, 0], ws[:, 1], W1, H1,
                          sa.hbox1[:, 0], sa.hbox1[:, 1],
                          sa.hbox1[:, 2], sa.hbox1[:, 3], want_grad)
    ga_ws = None
    if want_grad:
        g_cx, g_cy, g_W, g_H = ga
        ga_ws = np.stack([
            g_cx,
            g_cy,
            g_W * dW1[0] + g_H * dH1[0],
            g_W * dW1[1] + g_H * dH1[1],
            g_W * dW1[2] + g_H * dH1[2],
        ], axis=1)

    c_out = np.zeros((kk, n))
    b_out = np.zeros((kk, n))
    gc_ss = np.zeros((kk, n, 5)) if want_grad else None
    gb_src = np.zeros((kk, n, 5)) if want_grad else None
    gb_ss = np.zeros((kk, n, 5)) if want_grad else None

    for j, dt in enumerate(dthetas):
        cdt, sdt = math.cos(dt), math.sin(dt)
        # second-view prediction: scene-frame slot parameters carried into
        # the rotated frame (isotropic objects keep their stored angle)
        pc = _rotate_centers(ss[j, :, :2], dt, sa.center)
        p, q = ss[j, :, 2], ss[j, :, 3]
        r2 = np.where(sa.circ, ss[j, :, 4], ss[j, :, 4] + dt)
        gt2 = _view2_gt_hbox(sa, dt)
        W2, H2, dW2, dH2 = _r2h_dims_grad(p, q, r2)
        cterm, gc = _hbox_log_iou(pc[:, 0], pc[:, 1], W2, H2,
                                  gt2[:, 0], gt2[:, 1], gt2[:, 2], gt2[:, 3],
                                  want_grad)
        c_out[j] = cterm

        # consistency between the transformed source prediction and the slot
        sw = ws[src]
        tc = _rotate_centers(sw[:, :2], dt, sa.center)
        dx = tc[:, 0] - pc[:, 0]
        dy = tc[:, 1] - pc[:, 1]
        lxy = np.abs(dx) + np.abs(dy)
        # angle difference of target and prediction in the rotated frame
        delta = np.where(sa.circ, sw[:, 4] + dt - ss[j, :, 4],
                         sw[:, 4] - ss[j, :, 4])
        sind, cosd = np.sin(delta), np.cos(delta)
        iou_d, gd = _centered_log_iou(sw[:, 2], sw[:, 3], p, q, want_grad)
        iou_s, gs = _centered_log_iou(sw[:, 2], sw[:, 3], q, p, want_grad)
        branch_d = iou_d + np.abs(sind)
        branch_s = iou_s + np.abs(cosd)
        use_d = branch_d <= branch_s
        lwh = np.where(use_d, branch_d, branch_s)
        b_out[j] = gamma1 * lxy + gamma2 * lwh

        if want_grad:
            g_cx2, g_cy2, g_W2, g_H2 = gc
            gc_ss[j, :, 0] = cdt * g_cx2 + sdt * g_cy2   # R^T chain
            gc_ss[j, :, 1] = -sdt * g_cx2 + cdt * g_cy2
            gc_ss[j, :, 2] = g_W2 * dW2[0] + g_H2 * dH2[0]
            gc_ss[j, :, 3] = g_W2 * dW2[1] + g_H2 * dH2[1]
            gc_ss[j, :, 4] = g_W2 * dW2[2] + g_H2 * dH2[2]

            sx, sy = np.sign(dx), np.sign(dy)
            # d l_xy: centres of both operands rotate with the view
            glxy_src_x = cdt * sx + sdt * sy
            glxy_src_y = -sdt * sx + cdt * sy
            dang = np.where(use_d, np.sign(sind) * cosd, -np.sign(cosd) * sind)
            gb_src[j, :, 0] = gamma1 * glxy_src_x
            gb_src[j, :, 1] = gamma1 * glxy_src_y
            gb_src[j, :, 2] = gamma2 * np.where(use_d, gd[0], gs[0])
            gb_src[j, :, 3] = gamma2 * np.where(use_d, gd[1], gs[1])
            gb_src[j, :, 4] = gamma2 * dang
            gb_ss[j, :, 0] = -gamma1 * glxy_src_x
            gb_ss[j, :, 1] = -gamma1 * glxy_src_y
            # swapped branch feeds (q, p), so its grads swap back
            gb_ss[j, :, 2] = gamma2 * np.where(use_d, gd[2], gs[3])
            gb_ss[j, :, 3] = gamma2 * np.where(use_d, gd[3], gs[2])
            gb_ss[j, :, 4] = gamma2 * (-dang)

    return {"a": a, "c": c_out, "b": b_out, "ga_ws": ga_ws,
            "gc_ss": gc_ss, "gb_src": gb_src, "gb_ss": gb_ss}


def _weight_vectors(m1, m2, mss, w: LossWeights, ws_on_view2: bool,
                    ss_enabled: bool):
    """Per-object multipliers turning raw parts into loss contributions.

    The view-2 anchor exists only while the second branch exists, so it
    switches off together with the consistency loss.
    """
    kk = m2.shape[0]
    wa = np.where(m1, w.mu3, 0.0) / max(float(m1.sum()), _MASS_EPS)
    wc = np.zeros_like(m2, dtype=float)
    wb = np.zeros_like(mss, dtype=float)
    for j in range(kk):
        if ws_on_view2 and ss_enabled:
            wc[j] = np.where(m2[j], w.mu3, 0.0) / max(float(m2[j].sum()), _MASS_EPS) / kk
        if ss_enabled:
            wb[j] = np.where(mss[j], w.lam, 0.0) / max(float(mss[j].sum()), _MASS_EPS) / kk
    return wa, wc, wb


def _constant_terms(cfg: RecoveryConfig, n_classes: int) -> tuple[float, float]:
    """Per-object classification/centre-ness terms.  The simulator's
    class and centre-ness outputs are perfect (clamped), so these are
    constants independent of the box parameters: focal at p = 1-1e-7 for
    the own class, p = 1e-7 for the others, exact centre-ness."""
    w = cfg.weights
    # focal: positive -alpha (1-p)^g ln p; negative -(1-alpha) p^g ln(1-p)
    focal_pos = -0.25 * (PROB_CLAMP ** 2) * math.log(1.0 - PROB_CLAMP)
    focal_neg = -0.75 * (PROB_CLAMP ** 2) * math.log(1.0 - PROB_CLAMP)
    cls = w.mu1 * (focal_pos + (n_classes - 1) * focal_neg)
    cn = w.mu2 * (-math.log(1.0 - PROB_CLAMP))
    return cls, cn


# fixed rotation probes for start selection and final reporting; spaced
# away from the no-information (0) and aliasing (pi/2) angles
PROBE_DTHETAS = tuple(math.radians(d) for d in
                      (18.0, -18.0, 41.0, -41.0, 67.0, -67.0, 118.0, -118.0,
                       146.0, -146.0))


def _tile_scene(sa: _SceneArrays, s: int) -> _SceneArrays:
    return _SceneArrays(
        gt=np.tile(sa.gt, (s, 1)), circ=np.tile(sa.circ, s),
        class_ids=np.tile(sa.class_ids, s), hbox1=np.tile(sa.hbox1, (s, 1)),
        side=sa.side, center=sa.center,
    )


def _probe_losses(ws, ss, sa, src, cfg: RecoveryConfig) -> np.ndarray:
    """Per-object loss averaged over the fixed probe rotations (raw
    parts, masked; used both for start selection and final reporting)."""
    g1, g2w = cfg.weights.gamma1, cfg.weights.gamma2
    eff_view2 = cfg.ws_on_view2 and cfg.ss_enabled
    acc = np.zeros(ws.shape[0])
    cnt = np.zeros(ws.shape[0])
    for dt in PROBE_DTHETAS:
        dts = np.array([dt])
        m1, m2 = _step_masks(sa, dts, cfg.border_mode)
        mss = m2.copy()
        if cfg.s1_mask_circular:
            mss &= ~sa.circ[None, :]
        p = _parts(ws, ss[None, :, :] if ss.ndim == 2 else ss, sa, dts, src,
                   want_grad=False, gamma1=g1, gamma2=g2w)
        val = np.where(m1, p["a"], 0.0)
        # anchor and consistency terms are judged only where consistency
        # actually trains this object; an uncoupled first-view candidate
        # must be selected on its own evidence alone
        if eff_view2:
            val = val + np.where(mss[0], p["c"][0], 0.0)
        if cfg.ss_enabled:
            val = val + cfg.weights.lam * np.where(mss[0], p["b"][0], 0.0)
        ok = m1 & m2[0]
        acc += np.where(ok, val, 0.0)
        cnt += ok
    return acc / np.maximum(cnt, 1.0)


def run_recovery(scene: SceneSpec, cfg: RecoveryConfig) -> RecoveryReport:
    """Optimise per-object box parameters under the configured losses.

    The per-object objective is multimodal (the mirror family and
    shallower circumscribed-box aliases are competing basins), so the
    optimiser is multi-start descent: ``n_starts`` copies whose initial
    angles are spread over the half-turn run side by side and the final
    candidate per object is the one with the lowest loss on a fixed set
    of probe rotations.  Ties (within 1e-9) keep the earliest start, so
    configurations whose loss cannot distinguish the basins, such as the
    consistency-free one, retain plain single-start behaviour.
    """
    if not scene.objects:
        raise ValueError("scene is empty")
    sa0 = _SceneArrays.from_scene(scene)
    n = sa0.gt.shape[0]
    kk = cfg.num_views
    ns = max(1, cfg.n_starts)
    g1, g2w = cfg.weights.gamma1, cfg.weights.gamma2
    eff_view2 = cfg.ws_on_view2 and cfg.ss_enabled

    rng_views = np.random.default_rng([cfg.seed, 7919])
    rng_init = np.random.default_rng([cfg.seed, 104729])

    # base start angle: axis-aligned plus noise, or the mirror twin
    if cfg.init_mode == "hbox":
        theta0 = math.radians(cfg.init_angle_noise_deg) * rng_init.uniform(-1, 1, n)
    else:
        theta0 = -sa0.gt[:, 4] + math.radians(0.5) * rng_init.uniform(-1, 1, n)

    # assignment source indices (static: candidate locations are fixed)
    if cfg.assigner == "o2o":
        src0 = np.arange(n)
    else:
        cands_per = max(1, cfg.o2m_candidates)
        locs = np.repeat(sa0.gt[:, :2], cands_per, axis=0) + \
            rng_init.uniform(-cfg.o2m_jitter / 2.0, cfg.o2m_jitter / 2.0,
                             (n * cands_per, 2))
        cand_source = np.repeat(np.arange(n), cands_per)
        chosen = o2m_source_indices(locs, sa0.gt[:, :2])
        src0 = cand_source[chosen]

    # tile starts into the batch: start s offsets every initial angle by
    # s * pi / n_starts, covering the angle period; each start's sizes
    # come from inverting the view-1 circumscribed equations at the start
    # angle, so every start is a feasible first-view hypothesis
    sa = _tile_scene(sa0, ns)
    offsets = np.repeat(np.arange(ns) * math.pi / ns, n)
    thetas0 = np.tile(theta0, ns) + offsets
    W1 = sa.hbox1[:, 2]
    H1 = sa.hbox1[:, 3]
    c0 = np.abs(np.cos(thetas0))
    s0 = np.abs(np.sin(thetas0))
    det0 = c0 * c0 - s0 * s0
    safe0 = np.abs(det0) > 1e-6
    det_s = np.where(safe0, det0, 1.0)
    w_init = (W1 * c0 - H1 * s0) / det_s
    h_init = (H1 * c0 - W1 * s0) / det_s
    feas = safe0 & (w_init > 0) & (h_init > 0)
    w_init = np.where(feas, w_init, W1)
    h_init = np.where(feas, h_init, H1)
    ws = np.column_stack([sa.hbox1[:, 0], sa.hbox1[:, 1],
                          w_init, h_init, thetas0])
    ss = np.repeat(ws[None, :, :], kk, axis=0).copy()
    src = np.concatenate([src0 + s * n for s in range(ns)])
    nt = n * ns

    exclude = math.radians(cfg.dtheta_exclude_deg)

    def draw_dthetas() -> np.ndarray:
        out = np.empty(kk)
        for j in range(kk):
            while True:
                dt = rng_views.uniform(-math.pi, math.pi)
                rem = abs(dt) % (math.pi / 2.0)
                if min(rem, math.pi / 2.0 - rem) >= exclude:
                    out[j] = dt
                    break
        return out

    # rotations fixed per slot by default: each run then optimises a
    # deterministic two-view geometry; per-step resampling is available
    # for study but leaves the collapsed per-object model far noisier
    fixed_dthetas = draw_dthetas()

    n_classes = int(sa.class_ids.max())
    cls_const, cn_const = _constant_terms(cfg, n_classes)
    const_per_obj = cls_const + cn_const

    wh_floor = 1e-3 * sa.side
    mom_ws = np.zeros_like(ws)
    mom_ss = np.zeros_like(ss)
    g2_ws = np.zeros_like(ws)
    g2_ss = np.zeros_like(ss)
    beta1 = 0.9
    decay = 0.99
    eps = 1e-8
    m1_steps = int(cfg.lr_milestones[0] * cfg.steps)
    m2_steps = int(cfg.lr_milestones[1] * cfg.steps)
    fd_scales = np.array([sa.side, sa.side, sa.side, sa.side, 1.0]) * 1e-6

    loss_trace: list[float] = []
    trace_steps: list[int] = []
    tiled_trace: list[np.ndarray] = []
    per_obj_loss = np.zeros(nt)
    diverged = False

    for step in range(cfg.steps):
        dthetas = draw_dthetas() if cfg.resample_views else fixed_dthetas
        m1, m2 = _step_masks(sa, dthetas, cfg.border_mode)
        mss = m2.copy()
        if cfg.s1_mask_circular:
            mss &= ~sa.circ[None, :]
        wa, wc, wb = _weight_vectors(m1, m2, mss, cfg.weights,
                                     eff_view2, cfg.ss_enabled)

        if cfg.grad_mode == "analytic":
            parts = _parts(ws, ss, sa, dthetas, src, want_grad=True,
                           gamma1=g1, gamma2=g2w)
            g_ws = wa[:, None] * parts["ga_ws"]
            g_ss = wc[:, :, None] * parts["gc_ss"] + wb[:, :, None] * parts["gb_ss"]
            if not cfg.stop_grad_target:
                for j in range(kk):
                    np.add.at(g_ws, src, wb[j][:, None] * parts["gb_src"][j])
        else:
            parts = _parts(ws, ss, sa, dthetas, src, want_grad=False,
                           gamma1=g1, gamma2=g2w)
            g_ws = np.zeros_like(ws)
            g_ss = np.zeros_like(ss)
            for p_idx in range(5):
                h = fd_scales[p_idx]
                wp = ws.copy(); wp[:, p_idx] += h
                wm = ws.copy(); wm[:, p_idx] -= h
                pp = _parts(wp, ss, sa, dthetas, src, want_grad=False,
                            gamma1=g1, gamma2=g2w)
                pm = _parts(wm, ss, sa, dthetas, src, want_grad=False,
                            gamma1=g1, gamma2=g2w)
                g_ws[:, p_idx] += wa * (pp["a"] - pm["a"]) / (2 * h)
                if not cfg.stop_grad_target:
                    for j in range(kk):
                        np.add.at(g_ws[:, p_idx], src,
                                  wb[j] * (pp["b"][j] - pm["b"][j]) / (2 * h))
                for j in range(kk):
                    sp = ss.copy(); sp[j, :, p_idx] += h
                    sm = ss.copy(); sm[j, :, p_idx] -= h
                    qp = _parts(ws, sp, sa, dthetas, src, want_grad=False,
                                gamma1=g1, gamma2=g2w)
                    qm = _parts(ws, sm, sa, dthetas, src, want_grad=False,
                                gamma1=g1, gamma2=g2w)
                    g_ss[j, :, p_idx] = (g_ss[j, :, p_idx]
                                         + wc[j] * (qp["c"][j] - qm["c"][j]) / (2 * h)
                                         + wb[j] * (qp["b"][j] - qm["b"][j]) / (2 * h))

        per_obj_loss = (wa * parts["a"]
                        + (wc * parts["c"]).sum(axis=0)
                        + (wb * parts["b"]).sum(axis=0)
                        + const_per_obj / nt)
        total = float(per_obj_loss.sum())
        loss_trace.append(total)
        if step % cfg.trace_every == 0 or step == cfg.steps - 1:
            trace_steps.append(step)
            tiled_trace.append(per_obj_loss.copy())

        if not math.isfinite(total):
            diverged = True
            break

        lr = cfg.step_size
        if step >= m1_steps:
            lr *= cfg.lr_gamma
        if step >= m2_steps:
            lr *= cfg.lr_gamma

        t1 = step + 1
        corr1 = 1.0 - beta1 ** t1
        corr2 = 1.0 - decay ** t1
        mom_ws = beta1 * mom_ws + (1.0 - beta1) * g_ws
        mom_ss = beta1 * mom_ss + (1.0 - beta1) * g_ss
        g2_ws = decay * g2_ws + (1.0 - decay) * g_ws * g_ws
        g2_ss = decay * g2_ss + (1.0 - decay) * g_ss * g_ss
        ws = ws - lr * (mom_ws / corr1) / (np.sqrt(g2_ws / corr2) + eps)
        ss = ss - lr * (mom_ss / corr1) / (np.sqrt(g2_ss / corr2) + eps)
        ws[:, 2:4] = np.maximum(ws[:, 2:4], wh_floor)
        ss[:, :, 2:4] = np.maximum(ss[:, :, 2:4], wh_floor)
        if not (np.isfinite(ws).all() and np.isfinite(ss).all()):
            diverged = True
            break

    # start selection on the probe rotations; near-ties keep the lowest
    # start, so losses that cannot separate the basins (consistency off)
    # fall back to the base trajectory
    probe = _probe_losses(ws, ss, sa, src, cfg).reshape(ns, n)
    best = probe.min(axis=0)
    winner = np.argmax(probe <= best[None, :] + _TIE_EPS, axis=0)
    rows = winner * n + np.arange(n)
    ws_fin = ws[rows]
    per_obj_final = probe[winner, np.arange(n)] + const_per_obj / n

    pred_boxes = [RBox(*ws_fin[i]) for i in range(n)]
    outcomes = []
    errs = []
    flips = []
    ious = rbox_iou_pairs(ws_fin, sa0.gt)
    for i, obj in enumerate(scene.objects):
        pred = pred_boxes[i]
        err = angle_error(pred, obj.gt_rbox)
        flip = is_flipped(pred, obj.gt_rbox, cfg.tau_flip_deg)
        errs.append(err)
        if flip is not None:
            flips.append(flip)
        outcomes.append(ObjectOutcome(
            object_id=obj.id,
            gt_theta_deg=math.degrees(obj.gt_rbox.theta),
            pred_theta_deg=math.degrees(pred.canonical().theta),
            angle_err_deg=err,
            flipped=flip,
            iou=float(ious[i]),
            final_loss=float(per_obj_final[i]),
        ))

    per_object_trace = [[float(v[rows[i]]) for v in tiled_trace]
                        for i in range(n)]
    errs_arr = np.array(errs)
    breakdown = _final_breakdown(ws_fin, ss, sa0, src0, winner, n, cfg,
                                 cls_const, cn_const)
    return RecoveryReport(
        outcomes=outcomes,
        pred_boxes=pred_boxes,
        median_angle_err_deg=float(np.median(errs_arr)),
        p95_angle_err_deg=float(np.percentile(errs_arr, 95)),
        flip_fraction=float(np.mean(flips)) if flips else 0.0,
        n_flip_defined=len(flips),
        diverged=diverged,
        loss_trace=loss_trace,
        trace_steps=trace_steps,
        per_object_trace=per_object_trace,
        breakdown=breakdown,
        config=cfg,
    )


def _final_breakdown(ws_fin, ss_tiled, sa0, src0, winner, n,
                     cfg: RecoveryConfig, cls_const, cn_const) -> dict:
    """Loss components of the selected candidates, averaged over the
    probe rotations."""
    kk = ss_tiled.shape[0]
    rows = winner * n + np.arange(n)
    ss_fin = ss_tiled[:, rows, :]
    g1, g2w = cfg.weights.gamma1, cfg.weights.gamma2
    eff_view2 = cfg.ws_on_view2 and cfg.ss_enabled
    reg1 = reg2 = ssv = 0.0
    for dt in PROBE_DTHETAS:
        dts = np.full(kk, dt)
        m1, m2 = _step_masks(sa0, dts, cfg.border_mode)
        mss = m2.copy()
        if cfg.s1_mask_circular:
            mss &= ~sa0.circ[None, :]
        wa, wc, wb = _weight_vectors(m1, m2, mss, cfg.weights,
                                     eff_view2, cfg.ss_enabled)
        p = _parts(ws_fin, ss_fin, sa0, dts, src0, want_grad=False,
                   gamma1=g1, gamma2=g2w)
        reg1 += float((wa * p["a"]).sum()) / len(PROBE_DTHETAS)
        reg2 += float((wc * p["c"]).sum()) / len(PROBE_DTHETAS)
        if cfg.ss_enabled:
            for j in range(kk):
                ssv += float((p["b"][j] * mss[j]).sum()) \
                    / max(float(mss[j].sum()), _MASS_EPS) / kk / len(PROBE_DTHETAS)
    total = cls_const + cn_const + reg1 + reg2 + cfg.weights.lam * ssv
    return {
        "ws": {"cls": cls_const, "cn": cn_const, "reg": reg1,
               "reg_view2": reg2},
        "ss": ssv,
        "total": total,
        "weights": cfg.weights.to_json_dict(),
    }


# -- single-configuration objective, used by the gradient check -------------

def single_object_objective(params: np.ndarray, gt5: np.ndarray, circular: bool,
                            dtheta: float, center: tuple[float, float],
                            weights: LossWeights, ss_enabled: bool = True,
                            ws_on_view2: bool = True,
                            stop_grad_target: bool = False) -> float:
    """Total loss of one object given flat ``[ws(5), ss(5)]`` parameters."""
    cfg = RecoveryConfig(weights=weights, ss_enabled=ss_enabled,
                         ws_on_view2=ws_on_view2,
                         stop_grad_target=stop_grad_target)
    sa = _single_scene_arrays(gt5, circular, center)
    ws = params[:5][None, :].astype(float)
    ss = params[5:][None, None, :].astype(float)
    m1 = np.ones(1, dtype=bool)
    m2 = np.ones((1, 1), dtype=bool)
    wa, wc, wb = _weight_vectors(m1, m2, m2.copy(), weights,
                                 ws_on_view2 and ss_enabled, ss_enabled)
    parts = _parts(ws, ss, sa, np.array([dtheta]), np.array([0]),
                   want_grad=False, gamma1=weights.gamma1, gamma2=weights.gamma2)
    return float(wa[0] * parts["a"][0] + wc[0, 0] * parts["c"][0, 0]
                 + wb[0, 0] * parts["b"][0, 0])


def single_object_grad(params: np.ndarray, gt5: np.ndarray, circular: bool,
                       dtheta: float, center: tuple[float, float],
                       weights: LossWeights, ss_enabled: bool = True,
                       ws_on_view2: bool = True,
                       stop_grad_target: bool = False) -> np.ndarray:
    """Analytic gradient of :func:`single_object_objective` (10-vector)."""
    cfg = RecoveryConfig(weights=weights, ss_enabled=ss_enabled,
                         ws_on_view2=ws_on_view2,
                         stop_grad_target=stop_grad_target)
    sa = _single_scene_arrays(gt5, circular, center)
    ws = params[:5][None, :].astype(float)
    ss = params[5:][None, None, :].astype(float)
    m1 = np.ones(1, dtype=bool)
    m2 = np.ones((1, 1), dtype=bool)
    wa, wc, wb = _weight_vectors(m1, m2, m2.copy(), weights,
                                 ws_on_view2 and ss_enabled, ss_enabled)
    parts = _parts(ws, ss, sa, np.array([dtheta]), np.array([0]),
                   want_grad=True, gamma1=weights.gamma1, gamma2=weights.gamma2)
    g_ws = wa[:, None] * parts["ga_ws"]
    if not stop_grad_target:
        g_ws = g_ws + wb[0][:, None] * parts["gb_src"][0]
    g_ss = wc[0][:, None] * parts["gc_ss"][0] + wb[0][:, None] * parts["gb_ss"][0]
    return np.concatenate([g_ws[0], g_ss[0]])


def _single_scene_arrays(gt5, circular, center) -> _SceneArrays:
    gt = np.asarray(gt5, dtype=float)[None, :]
    W, H = _r2h_dims(gt[:, 2], gt[:, 3], gt[:, 4])
    return _SceneArrays(
        gt=gt, circ=np.array([circular]), class_ids=np.array([1]),
        hbox1=np.column_stack([gt[:, 0], gt[:, 1], W, H]),
        side=max(center) * 2.0 if max(center) > 0 else 256.0,
        center=np.asarray(center, dtype=float),
    )


# -- ablation harness --------------------------------------------------------

@dataclass(frozen=True)
class AblationRow:
    table: str
    label: str
    ap: float
    ap50: float
    ap75: float
    median_angle_err_deg: float
    flip_fraction: float

    def to_json_dict(self) -> dict:
        return {"table": self.table, "label": self.label, "ap": self.ap,
                "ap50": self.ap50, "ap75": self.ap75,
                "median_angle_err_deg": self.median_angle_err_deg,
                "flip_fraction": self.flip_fraction}


def ablate(scene: SceneSpec, base: RecoveryConfig,
           dense_scene: SceneSpec | None = None,
           circular_scene: SceneSpec | None = None) -> list[AblationRow]:
    """Single-factor sweeps mirroring the standard ablation tables:
    consistency on/off, assigner on a dense scene, border mode, and the
    circular-class strategies on a circular scene.  All rows share the
    base seed."""
    from .evaluation import evaluate, report_detections

    rows: list[AblationRow] = []

    def run_row(table: str, label: str, scn: SceneSpec, cfg: RecoveryConfig,
                s2: bool = False):
        rep = run_recovery(scn, cfg)
        dets = report_detections(rep, scn)
        res = evaluate(dets, list(scn.objects), s2_circular=s2)
        rows.append(AblationRow(
            table=table, label=label, ap=res.ap, ap50=res.ap50, ap75=res.ap75,
            median_angle_err_deg=rep.median_angle_err_deg,
            flip_fraction=rep.flip_fraction))

    run_row("ss_loss", "ss_on", scene, replace(base, ss_enabled=True))
    run_row("ss_loss", "ss_off", scene, replace(base, ss_enabled=False))

    dscene = dense_scene if dense_scene is not None else scene
    run_row("assigner", "o2o", dscene, replace(base, assigner="o2o"))
    run_row("assigner", "o2m", dscene, replace(base, assigner="o2m"))

    run_row("view_mode", "pad", scene, replace(base, border_mode=PAD))
    run_row("view_mode", "crop", scene, replace(base, border_mode=CROP))

    if circular_scene is not None:
        combos = [("neither", False, False), ("s1", True, False),
                  ("s2", False, True), ("s1+s2", True, True)]
        for label, s1, s2 in combos:
            run_row("circular", label, circular_scene,
                    replace(base, s1_mask_circular=s1,
                            s2_output_hbox_circular=s2), s2=s2)
    return rows
