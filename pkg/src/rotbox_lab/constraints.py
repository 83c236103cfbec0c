"""Feasibility analysis of the two-view circumscribed-rectangle system.

A rotated box ``(w, h, theta)`` observed through its axis-aligned
circumscribed rectangle in two views (the second rotated by a known
``delta_theta``) satisfies::

    w|cos(theta)| + h|sin(theta)| = W1      (view 1)
    w|sin(theta)| + h|cos(theta)| = H1
    w|cos(phi)|   + h|sin(phi)|   = W2      (view 2, phi = view-2 angle)
    w|sin(phi)|   + h|cos(phi)|   = H2

Constraint sets analysed here:

* HCRC -- view-1 equations only; feasible set is a one-parameter family.
* +SC  -- view-2 size equations must also hold for *some* admissible
  phi; the view-2 angle may agree with the rotation (``phi = theta +
  delta_theta``, the coincident branch) or mirror it (``phi = -theta +
  delta_theta``, the symmetric branch).  Generically two solutions.
* +AC  -- the angle relation is pinned to ``phi = theta + delta_theta``
  (coincident branch only), which removes the mirrored family whenever
  ``delta_theta != 0 mod pi/2``.

The sweep is the oracle of record: a theta grid with local refinement of
residual minima.  ``analytic_two_solutions`` root-solves each branch
directly and must agree with the sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import minimize_scalar

from .geometry import angle_normalize

__all__ = [
    "Classification",
    "ConstraintProblem",
    "FeasibleSolution",
    "SolutionSet",
    "TwoSolutions",
    "NoSolutionError",
    "circumscribed_dims",
    "solve_wh_given_theta",
    "enumerate_feasible",
    "analytic_two_solutions",
    "parse_constraint_set",
]

DEFAULT_GRID_STEP = math.radians(0.25)
SINGULAR_GUARD = math.radians(0.5)  # skipped band around |theta| = pi/4
_BIG = 1e18


class Classification(str, Enum):
    INFINITE_FAMILY = "INFINITE_FAMILY"
    TWO_FOLD = "TWO_FOLD"
    UNIQUE = "UNIQUE"
    EMPTY = "EMPTY"


class NoSolutionError(ValueError):
    """Observations admit no box within tolerance."""


@dataclass(frozen=True)
class ConstraintProblem:
    view1_dims: tuple[float, float]
    view2_dims: tuple[float, float]
    delta_theta: float

    def __post_init__(self):
        for name, (a, b) in (("view1_dims", self.view1_dims),
                             ("view2_dims", self.view2_dims)):
            if not (a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b)):
                raise ValueError(f"{name} must be positive finite, got ({a}, {b})")
        if not math.isfinite(self.delta_theta):
            raise ValueError("delta_theta must be finite")

    @classmethod
    def from_gt(cls, w: float, h: float, theta: float,
                delta_theta: float) -> "ConstraintProblem":
        """Problem whose observations come from a known ground-truth box."""
        return cls(circumscribed_dims(w, h, theta),
                   circumscribed_dims(w, h, theta + delta_theta),
                   delta_theta)

    @property
    def max_dim(self) -> float:
        return max(*self.view1_dims, *self.view2_dims)

    def to_json_dict(self) -> dict:
        return {"view1_dims": list(self.view1_dims),
                "view2_dims": list(self.view2_dims),
                "delta_theta": self.delta_theta}


@dataclass(frozen=True)
class FeasibleSolution:
    w: float
    h: float
    theta: float
    residual: float

    def to_json_dict(self) -> dict:
        return {"w": self.w, "h": self.h, "theta": self.theta,
                "residual": self.residual}


@dataclass
class SolutionSet:
    solutions: list[FeasibleSolution]
    classification: Classification
    clusters: list[dict]
    degenerate_square: bool
    constraint_set: str
    grid_step: float
    tol: float
    notes: list[str] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "constraint_set": self.constraint_set,
            "classification": self.classification.value,
            "degenerate_square": self.degenerate_square,
            "grid_step": self.grid_step,
            "tol": self.tol,
            "n_solutions": len(self.solutions),
            "clusters": self.clusters,
            "notes": self.notes,
            "solutions": [s.to_json_dict() for s in self.solutions],
        }


@dataclass(frozen=True)
class TwoSolutions:
    coincident: FeasibleSolution
    symmetric: FeasibleSolution
    degenerate_square: bool


def circumscribed_dims(w: float, h: float, theta: float) -> tuple[float, float]:
    """Width/height of the axis-aligned box circumscribing ``(w, h, theta)``."""
    c, s = abs(math.cos(theta)), abs(math.sin(theta))
    return (w * c + h * s, w * s + h * c)


def solve_wh_given_theta(W: float, H: float, theta: float,
                         singular_tol: float = 1e-9
                         ) -> tuple[float, float] | None:
    """Invert the view equations for ``(w, h)`` at a fixed angle.

    Returns ``None`` when the 2x2 system is singular (``cos(2*theta)``
    within ``singular_tol`` of zero, i.e. theta near +-45 degrees) or when
    the solved sides are not both positive.
    """
    c, s = abs(math.cos(theta)), abs(math.sin(theta))
    det = c * c - s * s
    if abs(det) < singular_tol:
        return None
    w = (W * c - H * s) / det
    h = (H * c - W * s) / det
    if w <= 0.0 or h <= 0.0:
        return None
    return (w, h)


def parse_constraint_set(spec: str) -> frozenset[str]:
    """Parse names like ``"hcrc+sc+ac"`` into the active-constraint set."""
    parts = {p.strip().lower() for p in spec.replace(",", "+").split("+") if p.strip()}
    unknown = parts - {"hcrc", "sc", "ac"}
    if unknown:
        raise ValueError(f"unknown constraints: {sorted(unknown)}")
    if "hcrc" not in parts:
        raise ValueError("HCRC is always active and must be listed")
    if "ac" in parts and "sc" not in parts:
        raise ValueError("AC requires SC")
    return frozenset(parts)


def _canonical(w: float, h: float, theta: float,
               square_tol: float) -> tuple[float, float, float]:
    """Fold to the w >= h representation; squares fold theta mod pi/2."""
    if w < h:
        w, h = h, w
        theta = angle_normalize(theta + math.pi / 2.0)
    else:
        theta = angle_normalize(theta)
    if abs(w - h) <= square_tol * max(w, h):
        # square boxes repeat every quarter turn
        theta = (theta + math.pi / 4.0) % (math.pi / 2.0) - math.pi / 4.0
    return (w, h, theta)


def _theta_dist(a: float, b: float, period: float) -> float:
    d = abs(a - b) % period
    return min(d, period - d)


def _residual_grid(problem: ConstraintProblem, thetas: np.ndarray,
                   branch: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized (w, h, residual) along the grid for one SC branch."""
    W1, H1 = problem.view1_dims
    W2, H2 = problem.view2_dims
    c = np.abs(np.cos(thetas))
    s = np.abs(np.sin(thetas))
    det = c * c - s * s
    safe = np.abs(det) > 1e-15
    det_safe = np.where(safe, det, 1.0)
    w = (W1 * c - H1 * s) / det_safe
    h = (H1 * c - W1 * s) / det_safe
    ok = safe & (w > 0.0) & (h > 0.0)
    phi = thetas + problem.delta_theta if branch == "c" else -thetas + problem.delta_theta
    cp = np.abs(np.cos(phi))
    sp = np.abs(np.sin(phi))
    resid = np.maximum(np.abs(w * cp + h * sp - W2), np.abs(w * sp + h * cp - H2))
    resid = np.where(ok, resid, _BIG)
    return w, h, resid


def _residual_at(problem: ConstraintProblem, theta: float, branch: str) -> float:
    got = solve_wh_given_theta(*problem.view1_dims, theta, singular_tol=1e-15)
    if got is None:
        return _BIG
    w, h = got
    phi = theta + problem.delta_theta if branch == "c" else -theta + problem.delta_theta
    W2, H2 = problem.view2_dims
    cW, cH = circumscribed_dims(w, h, phi)
    return max(abs(cW - W2), abs(cH - H2))


def _refine_minimum(problem: ConstraintProblem, theta0: float, half_width: float,
                    branch: str) -> tuple[float, float] | None:
    res = minimize_scalar(
        lambda t: _residual_at(problem, t, branch),
        bounds=(theta0 - half_width, theta0 + half_width),
        method="bounded",
        options={"xatol": 1e-13},
    )
    if not res.success or not math.isfinite(res.fun):
        return None
    return float(res.x), float(res.fun)


def _local_min_indices(resid: np.ndarray, valid: np.ndarray) -> list[int]:
    """Indices of local minima among valid grid points, wrapping mod pi."""
    n = len(resid)
    out = []
    for i in range(n):
        if not valid[i]:
            continue
        prev_i = (i - 1) % n
        next_i = (i + 1) % n
        left = resid[prev_i] if valid[prev_i] else _BIG
        right = resid[next_i] if valid[next_i] else _BIG
        if resid[i] <= left and resid[i] <= right:
            out.append(i)
    return out


def _cluster(entries: list[FeasibleSolution], radius: float,
             period: float) -> list[list[FeasibleSolution]]:
    """Single-link clustering on canonical theta (sorted, wrap-aware)."""
    if not entries:
        return []
    entries = sorted(entries, key=lambda e: (e.theta, e.residual))
    groups = [[entries[0]]]
    for e in entries[1:]:
        if _theta_dist(e.theta, groups[-1][-1].theta, period) <= radius:
            groups[-1].append(e)
        else:
            groups.append([e])
    # wrap: first and last groups may be one cluster mod the period
    if len(groups) > 1 and _theta_dist(groups[0][0].theta,
                                       groups[-1][-1].theta, period) <= radius:
        groups[0] = groups.pop() + groups[0]
    return groups


def enumerate_feasible(problem: ConstraintProblem,
                       constraints="hcrc+sc+ac",
                       grid_step: float = DEFAULT_GRID_STEP,
                       tol: float | None = None) -> SolutionSet:
    """Brute-force sweep of theta with per-cell refinement of residual minima.

    HCRC keeps every grid angle that inverts to a positive box; SC/AC
    additionally require the view-2 equations within ``tol`` (SC accepts
    either angle branch, AC only the coincident one).  A +-0.5 degree
    band around theta = +-45 degrees is skipped (singular inversion) and
    recorded in the notes.
    """
    if isinstance(constraints, str):
        active = parse_constraint_set(constraints)
    else:
        active = frozenset(str(c).lower() for c in constraints)
    set_name = "hcrc" + ("+sc" if "sc" in active else "") + ("+ac" if "ac" in active else "")

    if tol is None:
        tol = 1e-6 * problem.max_dim
    square_tol = 1e-6

    W1, H1 = problem.view1_dims
    W2, H2 = problem.view2_dims
    degenerate_square = (abs(W1 - H1) <= square_tol * max(W1, H1)
                         and abs(W2 - H2) <= square_tol * max(W2, H2))
    period = math.pi / 2.0 if degenerate_square else math.pi

    n = max(8, int(round(math.pi / grid_step)))
    thetas = -math.pi / 2.0 + np.arange(n) * (math.pi / n)
    guard = (np.abs(np.abs(thetas) - math.pi / 4.0) < SINGULAR_GUARD)

    notes = [f"singular guard band +-{math.degrees(SINGULAR_GUARD):.3g} deg around +-45 deg skipped"]
    if degenerate_square:
        notes.append("DEGENERATE_SQUARE: observations equal in both views; "
                     "solutions folded modulo a quarter turn")

    accepted: list[FeasibleSolution] = []

    def _push(w, h, theta, resid):
        cw, ch, ct = _canonical(w, h, theta, square_tol)
        accepted.append(FeasibleSolution(cw, ch, ct, resid))

    if "sc" not in active:
        w_arr, h_arr, _ = _residual_grid(problem, thetas, "c")
        ok = (~guard) & (w_arr > 0.0) & (h_arr > 0.0)
        c = np.abs(np.cos(thetas))
        s = np.abs(np.sin(thetas))
        recon = np.maximum(np.abs(w_arr * c + h_arr * s - W1),
                           np.abs(w_arr * s + h_arr * c - H1))
        ok &= np.abs(np.cos(2.0 * thetas)) > 1e-12
        for i in np.nonzero(ok)[0]:
            _push(w_arr[i], h_arr[i], thetas[i], float(recon[i]))
    else:
        branches = ("c",) if "ac" in active else ("c", "s")
        for branch in branches:
            w_arr, h_arr, resid = _residual_grid(problem, thetas, branch)
            valid = (~guard) & (resid < _BIG)
            # direct grid acceptance covers degenerate flat-residual cases
            for i in np.nonzero(valid & (resid <= tol))[0]:
                _push(w_arr[i], h_arr[i], thetas[i], float(resid[i]))
            for i in _local_min_indices(resid, valid):
                got = _refine_minimum(problem, float(thetas[i]),
                                      math.pi / n, branch)
                if got is None:
                    continue
                t_star, r_star = got
                if r_star > tol:
                    continue
                wh = solve_wh_given_theta(W1, H1, t_star, singular_tol=1e-15)
                if wh is None:
                    continue
                _push(wh[0], wh[1], t_star, r_star)

    # dedup near-identical canonical entries (representation twins refine
    # to the same box up to float noise)
    accepted.sort(key=lambda e: (e.theta, e.residual))
    deduped: list[FeasibleSolution] = []
    for e in accepted:
        if deduped and _theta_dist(e.theta, deduped[-1].theta, period) <= 1e-7 \
                and abs(e.w - deduped[-1].w) <= 1e-6 * max(1.0, e.w):
            if e.residual < deduped[-1].residual:
                deduped[-1] = e
            continue
        deduped.append(e)

    radius = 2.0 * grid_step
    groups = _cluster(deduped, radius, period)
    clusters = []
    for g in groups:
        ts = [e.theta for e in g]
        span = max(_theta_dist(a, b, period) for a in ts for b in ts) if len(g) > 1 else 0.0
        best = min(g, key=lambda e: e.residual)
        clusters.append({
            "theta": best.theta, "w": best.w, "h": best.h,
            "n_members": len(g), "theta_span": span,
            "best_residual": best.residual,
        })

    if not deduped:
        cls = Classification.EMPTY
    elif len(deduped) >= 25 or any(c["theta_span"] > 4.0 * grid_step for c in clusters):
        cls = Classification.INFINITE_FAMILY
    elif len(clusters) == 1:
        cls = Classification.UNIQUE
    elif len(clusters) == 2:
        cls = Classification.TWO_FOLD
    else:
        cls = Classification.INFINITE_FAMILY
        notes.append(f"multi-cluster solution set ({len(clusters)} clusters)")

    return SolutionSet(
        solutions=deduped,
        classification=cls,
        clusters=clusters,
        degenerate_square=degenerate_square,
        constraint_set=set_name,
        grid_step=grid_step,
        tol=tol,
        notes=notes,
    )


def analytic_two_solutions(problem: ConstraintProblem,
                           tol: float | None = None) -> TwoSolutions:
    """Root-solve the two SC angle branches directly.

    Returns the coincident and symmetric candidates; each satisfies all
    four view equations (the symmetric one under its mirrored view-2
    angle).  Raises :class:`NoSolutionError` when the best residual stays
    above tolerance, i.e. the observations are inconsistent.
    """
    if tol is None:
        tol = 1e-6 * problem.max_dim
    square_tol = 1e-6
    W1, H1 = problem.view1_dims
    W2, H2 = problem.view2_dims
    degenerate_square = (abs(W1 - H1) <= square_tol * max(W1, H1)
                         and abs(W2 - H2) <= square_tol * max(W2, H2))

    n = 1800  # 0.1 degree scan
    thetas = -math.pi / 2.0 + np.arange(n) * (math.pi / n)
    guard = (np.abs(np.abs(thetas) - math.pi / 4.0) < SINGULAR_GUARD)

    found = {}
    for branch in ("c", "s"):
        _, _, resid = _residual_grid(problem, thetas, branch)
        valid = (~guard) & (resid < _BIG)
        best = None
        for i in _local_min_indices(resid, valid):
            got = _refine_minimum(problem, float(thetas[i]), math.pi / n, branch)
            if got is None:
                continue
            if best is None or got[1] < best[1]:
                best = got
        if best is None or best[1] > tol:
            raise NoSolutionError(
                f"branch {branch}: best residual "
                f"{'inf' if best is None else best[1]:.3g} exceeds tol {tol:.3g}")
        t_star, r_star = best
        wh = solve_wh_given_theta(W1, H1, t_star, singular_tol=1e-15)
        if wh is None:
            raise NoSolutionError(f"branch {branch}: singular at refined root")
        cw, ch, ct = _canonical(wh[0], wh[1], t_star, square_tol)
        found[branch] = FeasibleSolution(cw, ch, ct, r_star)

    return TwoSolutions(coincident=found["c"], symmetric=found["s"],
                        degenerate_square=degenerate_square)
