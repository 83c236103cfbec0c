"""Command-line front end.

Subcommands: ``constraints`` (feasibility analysis of a two-view
observation), ``recover`` (gradient-descent recovery experiment),
``ablate`` (single-factor comparison tables), ``eval`` (AP evaluation of
a detections file), ``check`` (self-verification against independent
oracles).

Angles are degrees on the command line and radians everywhere else.
Exit codes: 0 ok, 1 check failure, 2 configuration error, 3 no solution,
4 diverged.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import constraints as C
from . import recovery as R
from .evaluation import Detection, evaluate, report_detections
from .kernels import BACKEND, rbox_iou_single
from .losses import LossWeights
from .oracles import fd_gradient, mc_rbox_iou, random_box_pair
from .report_io import dump_csv, dump_json, fixed_width_table, fmt9
from .scenes import generate_dense_pair_scene, generate_scene, load_scene, save_scene

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NO_SOLUTION = 3
EXIT_DIVERGED = 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.code = code


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="global random seed")
    common.add_argument("--out-dir", default="out", help="output directory")
    common.add_argument("--config", default=None,
                        help="JSON file with defaults for the subcommand flags; "
                             "explicit flags win, unknown keys are errors")
    common.add_argument("--threads", type=int, default=1,
                        help="reserved; the CLI runs single-process deterministic")

    p = argparse.ArgumentParser(
        prog="rotbox-lab",
        description="Rotated-box recovery laboratory "
                    f"(geometry kernels: {BACKEND})")
    sub = p.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("constraints", parents=[common],
                        help="feasibility of a two-view observation")
    pc.add_argument("--w", type=float, help="ground-truth width (builds observations)")
    pc.add_argument("--h", type=float, help="ground-truth height")
    pc.add_argument("--theta", type=float, help="ground-truth angle (deg)")
    pc.add_argument("--w1", type=float, help="observed view-1 width")
    pc.add_argument("--h1", type=float, help="observed view-1 height")
    pc.add_argument("--w2", type=float, help="observed view-2 width")
    pc.add_argument("--h2", type=float, help="observed view-2 height")
    pc.add_argument("--dtheta", type=float, required=True, help="view rotation (deg)")
    pc.add_argument("--sets", default="hcrc,hcrc+sc,hcrc+sc+ac",
                    help="comma-separated constraint sets")
    pc.add_argument("--grid-step", type=float, default=0.25,
                    help="sweep step (deg)")
    pc.add_argument("--tol", type=float, default=None,
                    help="feasibility tolerance (scene units)")
    pc.add_argument("--svg", action="store_true",
                    help="write the residual-vs-angle curve")

    pr = sub.add_parser("recover", parents=[common],
                        help="run a recovery experiment")
    _add_recover_flags(pr)
    pr.add_argument("--svg", action="store_true",
                    help="write the angle scatter plot")

    pa = sub.add_parser("ablate", parents=[common],
                        help="single-factor comparison tables")
    _add_recover_flags(pa)
    pa.add_argument("--dense-scene", default=None,
                    help="scene file for the assigner table (default: generated)")
    pa.add_argument("--circular-scene", default=None,
                    help="scene file for the circular table (default: generated)")

    pe = sub.add_parser("eval", parents=[common],
                        help="evaluate a detections file against a scene")
    pe.add_argument("--dets", required=True, help="detections JSON file")
    pe.add_argument("--scene", required=True, help="scene JSON file")
    pe.add_argument("--s2", action="store_true",
                    help="substitute circumscribed boxes for circular classes")

    pk = sub.add_parser("check", parents=[common],
                        help="run the oracle self-check suites")
    pk.add_argument("--suite", default="all",
                    choices=("all", "iou", "grad", "constraints"))
    pk.add_argument("--pairs", type=int, default=50,
                    help="random box pairs for the IoU suite")
    pk.add_argument("--mc-samples", type=int, default=1_000_000,
                    help="Monte-Carlo samples per pair")
    pk.add_argument("--grad-configs", type=int, default=200,
                    help="random configurations for the gradient suite")
    pk.add_argument("--problems", type=int, default=25,
                    help="random problems for the constraints suite")
    pk.add_argument("--inject-iou-bug", action="store_true",
                    help="test mode: perturb the IoU comparison (negative control)")
    return p


def _add_recover_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scene", default=None, help="scene JSON file (else generated)")
    p.add_argument("--objects", type=int, default=100, help="generated object count")
    p.add_argument("--side", type=float, default=256.0, help="generated scene side")
    p.add_argument("--aspect-min", type=float, default=1.5)
    p.add_argument("--aspect-max", type=float, default=3.5)
    p.add_argument("--theta-min", type=float, default=10.0,
                   help="min |angle| of generated boxes (deg)")
    p.add_argument("--theta-max", type=float, default=80.0,
                   help="max |angle| of generated boxes (deg)")
    p.add_argument("--circular-frac", type=float, default=0.0)
    p.add_argument("--steps", type=int, default=800)
    p.add_argument("--step-size", type=float, default=0.08)
    p.add_argument("--num-views", type=int, default=1)
    p.add_argument("--n-starts", type=int, default=12)
    p.add_argument("--resample-views", action="store_true",
                   help="draw a fresh view rotation every step")
    p.add_argument("--no-ss", action="store_true", help="disable the consistency branch")
    p.add_argument("--no-ws-on-view2", action="store_true",
                   help="drop the second-view circumscribed anchor")
    p.add_argument("--assigner", choices=("o2o", "o2m"), default="o2o")
    p.add_argument("--border-mode", choices=("pad", "crop"), default="pad")
    p.add_argument("--s1", action="store_true", help="mask consistency for circular classes")
    p.add_argument("--s2", action="store_true",
                   help="evaluate circular classes on circumscribed output")
    p.add_argument("--stop-grad-target", action="store_true",
                   help="stop the consistency gradient at the target box")
    p.add_argument("--grad-mode", choices=("analytic", "fd"), default="analytic")
    p.add_argument("--init-mode", choices=("hbox", "symmetric"), default="hbox")
    p.add_argument("--mu1", type=float, default=1.0)
    p.add_argument("--mu2", type=float, default=1.0)
    p.add_argument("--mu3", type=float, default=1.0)
    p.add_argument("--gamma1", type=float, default=0.15)
    p.add_argument("--gamma2", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.4)


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {args.config}: {exc}")
    if not isinstance(cfg, dict):
        raise CliError("config file must hold a JSON object")
    allowed = set(vars(args))
    unknown = set(cfg) - allowed
    if unknown:
        raise CliError(f"unknown config keys: {sorted(unknown)}")
    parser.set_defaults(**cfg)
    return parser.parse_args(argv)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- constraints --------------------------------------------------------------

def _residual_curve(problem: C.ConstraintProblem, set_name: str, n: int = 720):
    thetas = np.linspace(-90.0, 90.0, n, endpoint=False)
    vals = []
    for t in thetas:
        th = math.radians(t)
        wh = C.solve_wh_given_theta(*problem.view1_dims, th, 1e-12)
        if wh is None:
            vals.append(float("nan"))
            continue
        if "sc" in set_name:
            rc = C.circumscribed_dims(wh[0], wh[1], th + problem.delta_theta)
            r = max(abs(rc[0] - problem.view2_dims[0]),
                    abs(rc[1] - problem.view2_dims[1]))
            if "ac" not in set_name:
                rs = C.circumscribed_dims(wh[0], wh[1], -th + problem.delta_theta)
                r = min(r, max(abs(rs[0] - problem.view2_dims[0]),
                               abs(rs[1] - problem.view2_dims[1])))
        else:
            rc = C.circumscribed_dims(wh[0], wh[1], th)
            r = max(abs(rc[0] - problem.view1_dims[0]),
                    abs(rc[1] - problem.view1_dims[1]))
        vals.append(math.log10(r + 1e-16))
    return thetas, vals


def cmd_constraints(args) -> int:
    gt_mode = args.w is not None or args.h is not None or args.theta is not None
    obs_mode = any(v is not None for v in (args.w1, args.h1, args.w2, args.h2))
    if gt_mode and obs_mode:
        raise CliError("give either --w/--h/--theta or --w1/--h1/--w2/--h2")
    if gt_mode:
        if args.w is None or args.h is None or args.theta is None:
            raise CliError("ground-truth mode needs --w, --h and --theta")
        problem = C.ConstraintProblem.from_gt(
            args.w, args.h, math.radians(args.theta), math.radians(args.dtheta))
    elif obs_mode:
        if None in (args.w1, args.h1, args.w2, args.h2):
            raise CliError("observation mode needs --w1, --h1, --w2 and --h2")
        problem = C.ConstraintProblem((args.w1, args.h1), (args.w2, args.h2),
                                      math.radians(args.dtheta))
    else:
        raise CliError("no problem given")

    out = _out_dir(args)
    report = {"problem": problem.to_json_dict(), "results": []}
    any_solution = False
    for name in [s.strip() for s in args.sets.split(",") if s.strip()]:
        try:
            parsed = C.parse_constraint_set(name)
        except ValueError as exc:
            raise CliError(str(exc))
        sol = C.enumerate_feasible(problem, parsed,
                                   grid_step=math.radians(args.grid_step),
                                   tol=args.tol)
        report["results"].append(sol.to_json_dict())
        any_solution |= sol.classification != C.Classification.EMPTY
        print(f"{sol.constraint_set:14s} -> {sol.classification.value:16s} "
              f"({len(sol.solutions)} solutions, {len(sol.clusters)} clusters)")
        if args.svg:
            xs, ys = _residual_curve(problem, sol.constraint_set)
            clean = [(x, y) for x, y in zip(xs, ys) if math.isfinite(y)]
            from .svgplot import line_plot
            line_plot(out / f"residual_{sol.constraint_set.replace('+', '_')}.svg",
                      [x for x, _ in clean],
                      {sol.constraint_set: [y for _, y in clean]},
                      title=f"residual vs angle ({sol.constraint_set})",
                      xlabel="theta (deg)", ylabel="log10 residual")
    dump_json(out / "constraints.json", report)
    if not any_solution:
        print("no feasible solution in any requested set", file=sys.stderr)
        return EXIT_NO_SOLUTION
    return EXIT_OK


# -- recover / ablate ---------------------------------------------------------

def _recovery_config(args) -> R.RecoveryConfig:
    weights = LossWeights(mu1=args.mu1, mu2=args.mu2, mu3=args.mu3,
                          gamma1=args.gamma1, gamma2=args.gamma2, lam=args.lam)
    return R.RecoveryConfig(
        weights=weights, steps=args.steps, step_size=args.step_size,
        num_views=args.num_views, n_starts=args.n_starts,
        resample_views=args.resample_views,
        ss_enabled=not args.no_ss, ws_on_view2=not args.no_ws_on_view2,
        assigner=args.assigner, border_mode=args.border_mode,
        s1_mask_circular=args.s1, s2_output_hbox_circular=args.s2,
        stop_grad_target=args.stop_grad_target, seed=args.seed,
        grad_mode=args.grad_mode, init_mode=args.init_mode,
    )


def _load_or_generate_scene(args):
    if args.scene:
        return load_scene(args.scene), False
    scene = generate_scene(
        args.objects, side=args.side, seed=args.seed,
        aspect_range=(args.aspect_min, args.aspect_max),
        theta_abs_range_deg=(args.theta_min, args.theta_max),
        circular_frac=args.circular_frac)
    return scene, True


def _write_recovery_outputs(out: Path, scene, rep: R.RecoveryReport,
                            generated_scene: bool, svg: bool) -> None:
    if generated_scene:
        save_scene(scene, out / "scene.json")
    header = ["object_id", "gt_theta_deg", "pred_theta_deg", "angle_err_deg",
              "flipped", "iou", "final_loss"]
    rows = [[o.object_id, o.gt_theta_deg, o.pred_theta_deg, o.angle_err_deg,
             o.flipped, o.iou, o.final_loss] for o in rep.outcomes]
    dump_csv(out / "report.csv", header, rows)
    dump_json(out / "summary.json", rep.summary_json_dict())
    dets = report_detections(rep, scene)
    dump_json(out / "dets.json", {"detections": [d.to_json_dict() for d in dets]})
    if svg:
        from .svgplot import scatter_plot
        scatter_plot(out / "angles.svg",
                     [o.gt_theta_deg for o in rep.outcomes],
                     [o.pred_theta_deg for o in rep.outcomes],
                     title="predicted vs true angle", xlabel="true (deg)",
                     ylabel="predicted (deg)", diagonal=True)


def cmd_recover(args) -> int:
    scene, generated = _load_or_generate_scene(args)
    cfg = _recovery_config(args)
    rep = R.run_recovery(scene, cfg)
    out = _out_dir(args)
    _write_recovery_outputs(out, scene, rep, generated, args.svg)
    print(f"objects={len(rep.outcomes)} median_angle_err="
          f"{fmt9(rep.median_angle_err_deg)} deg "
          f"flip_fraction={fmt9(rep.flip_fraction)} "
          f"diverged={rep.diverged}")
    if rep.diverged:
        print("optimisation diverged (reduce --step-size)", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_ablate(args) -> int:
    scene, _ = _load_or_generate_scene(args)
    dense = (load_scene(args.dense_scene) if args.dense_scene
             else generate_dense_pair_scene(max(4, args.objects // 2),
                                            side=args.side, seed=args.seed + 1))
    circ = (load_scene(args.circular_scene) if args.circular_scene
            else generate_scene(args.objects, side=args.side, seed=args.seed + 2,
                                circular_frac=1.0))
    cfg = _recovery_config(args)
    rows = R.ablate(scene, cfg, dense_scene=dense, circular_scene=circ)
    out = _out_dir(args)
    header = ["table", "label", "AP", "AP50", "AP75", "median_angle_err_deg",
              "flip_fraction"]
    table_rows = [[r.table, r.label, r.ap, r.ap50, r.ap75,
                   r.median_angle_err_deg, r.flip_fraction] for r in rows]
    text = fixed_width_table(header, table_rows)
    print(text)
    (out / "ablate.txt").write_text(text + "\n")
    dump_csv(out / "ablate.csv", header, table_rows)
    dump_json(out / "ablate.json", {"rows": [r.to_json_dict() for r in rows]})
    return EXIT_OK


# -- eval ---------------------------------------------------------------------

def cmd_eval(args) -> int:
    try:
        payload = json.loads(Path(args.dets).read_text())
        dets = [Detection.from_json_dict(d) for d in payload["detections"]]
        scene = load_scene(args.scene)
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot load inputs: {exc}")
    res = evaluate(dets, list(scene.objects), s2_circular=args.s2)
    out = _out_dir(args)
    dump_json(out / "eval.json", res.to_json_dict())
    header = ["class", "AP", "AP50", "AP75"]
    rows = [[str(cid), v["ap"], v["ap50"], v["ap75"]]
            for cid, v in sorted(res.per_class.items())]
    rows.append(["mean", res.ap, res.ap50, res.ap75])
    dump_csv(out / "eval.csv", header, rows)
    print(fixed_width_table(header, rows))
    return EXIT_OK


# -- check --------------------------------------------------------------------

def _check_iou(args) -> tuple[bool, str]:
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.pairs):
        a, b = random_box_pair(rng)
        clip = rbox_iou_single(a.cx, a.cy, a.w, a.h, a.theta,
                               b.cx, b.cy, b.w, b.h, b.theta)
        if args.inject_iou_bug:
            clip += 0.01
        mc = mc_rbox_iou(a, b, args.mc_samples,
                         seed=int(rng.integers(0, 2 ** 31)))
        worst = max(worst, abs(clip - mc))
    ok = worst <= 5e-3
    return ok, (f"iou: {args.pairs} pairs vs {args.mc_samples}-sample "
                f"Monte-Carlo, worst |diff| = {fmt9(worst)} (tol 5e-3)")


def _check_grad(args) -> tuple[bool, str]:
    rng = np.random.default_rng(args.seed + 1)
    weights = LossWeights()
    worst = 0.0
    done = 0
    while done < args.grad_configs:
        gt, params, dtheta = _grad_config_sample(rng)
        f = lambda p: R.single_object_objective(p, gt, False, dtheta,
                                                (128.0, 128.0), weights)
        ana = R.single_object_grad(params, gt, False, dtheta, (128.0, 128.0),
                                   weights)
        num = fd_gradient(f, params, 1e-5)
        denom = np.maximum(np.abs(num), 1e-6)
        worst = max(worst, float(np.max(np.abs(ana - num) / denom)))
        done += 1
    ok = worst <= 1e-4
    return ok, (f"grad: {args.grad_configs} configurations, worst relative "
                f"error = {fmt9(worst)} (tol 1e-4)")


def _grad_config_sample(rng: np.random.Generator):
    """Random single-object configuration away from loss kinks."""
    while True:
        gt = np.array([128 + rng.uniform(-40, 40), 128 + rng.uniform(-40, 40),
                       rng.uniform(18, 40), rng.uniform(8, 14),
                       rng.uniform(-1.2, 1.2)])
        dtheta = rng.uniform(-2.5, 2.5)
        ws = gt + np.array([rng.uniform(-3, 3), rng.uniform(-3, 3),
                            rng.uniform(-3, 3), rng.uniform(-2, 2),
                            rng.uniform(-0.5, 0.5)])
        ss = gt + np.array([rng.uniform(-3, 3), rng.uniform(-3, 3),
                            rng.uniform(-3, 3), rng.uniform(-2, 2),
                            rng.uniform(-0.5, 0.5)])
        params = np.concatenate([ws, ss])
        if _away_from_kinks(params, gt, dtheta):
            return gt, params, dtheta


def _away_from_kinks(params: np.ndarray, gt: np.ndarray, dtheta: float,
                     margin_deg: float = 2.0, size_margin: float = 0.1) -> bool:
    m = math.radians(margin_deg)

    def angle_clear(t):
        r = abs(t) % (math.pi / 2)
        return min(r, math.pi / 2 - r) > m

    ws, ss = params[:5], params[5:]
    # r2h angle kinks at multiples of pi/2; branch terms at multiples of pi/2 of delta
    for t in (ws[4], ss[4] + dtheta, gt[4], gt[4] + dtheta):
        if not angle_clear(t):
            return False
    if not angle_clear(ws[4] - ss[4]):
        return False
    # min() kinks in the centred IoU
    if abs(ws[2] - ss[2]) < size_margin or abs(ws[3] - ss[3]) < size_margin:
        return False
    if abs(ws[2] - ss[3]) < size_margin or abs(ws[3] - ss[2]) < size_margin:
        return False
    # centre L1 kinks
    if abs(ws[0] - ss[0]) < size_margin or abs(ws[1] - ss[1]) < size_margin:
        return False
    return True


def _check_constraints(args) -> tuple[bool, str]:
    rng = np.random.default_rng(args.seed + 2)
    fails = 0
    for _ in range(args.problems):
        h = rng.uniform(2.0, 20.0)
        w = h * rng.uniform(1.2, 4.0)
        while True:
            theta = rng.uniform(math.radians(-80), math.radians(80))
            if abs(abs(theta) - math.pi / 4) > math.radians(2.0):
                break
        dt = rng.uniform(math.radians(10), math.radians(80))
        if rng.random() < 0.5:
            dt = -dt
        problem = C.ConstraintProblem.from_gt(w, h, theta, dt)
        sol = C.enumerate_feasible(problem, "hcrc+sc")
        two = C.analytic_two_solutions(problem)
        got = sorted(c["theta"] for c in sol.clusters)
        want = sorted((two.coincident.theta, two.symmetric.theta))
        ok = (sol.classification == C.Classification.TWO_FOLD
              and len(got) == len(want)
              and all(abs(a - b) < math.radians(0.5) for a, b in zip(got, want)))
        uniq = C.enumerate_feasible(problem, "hcrc+sc+ac")
        ok &= uniq.classification == C.Classification.UNIQUE
        if not ok:
            fails += 1
    return fails == 0, (f"constraints: {args.problems} problems, "
                        f"analytic vs sweep agreement failures = {fails}")


def cmd_check(args) -> int:
    suites = {
        "iou": _check_iou,
        "grad": _check_grad,
        "constraints": _check_constraints,
    }
    names = list(suites) if args.suite == "all" else [args.suite]
    all_ok = True
    for name in names:
        ok, msg = suites[name](args)
        all_ok &= ok
        print(f"[{'ok' if ok else 'FAIL'}] {msg}")
    return EXIT_OK if all_ok else EXIT_CHECK_FAILED


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = _apply_config_file(parser, sys.argv[1:] if argv is None else argv)
        handler = {
            "constraints": cmd_constraints,
            "recover": cmd_recover,
            "ablate": cmd_ablate,
            "eval": cmd_eval,
            "check": cmd_check,
        }[args.command]
        return handler(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except C.NoSolutionError as exc:
        print(f"no solution: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION


if __name__ == "__main__":
    sys.exit(main())
