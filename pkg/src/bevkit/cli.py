"""Command-line entry point.

Subcommands: gen-scene, augment, homography, depth-convert, bin-focal,
ordinal-loss, evaluate, selftest.  Every subcommand is pure in (inputs,
seed): identical invocations produce byte-identical files and stdout.
Exit codes: 0 success, 1 selftest check failure, 2 input or format error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .augment import PerturbationRange, analytic_homography, augment_scene, collect_pairs, fit_homography, perturb_pose
from .depth import DATASET_DEPTH_RANGES, DepthDecouplingConfig, metric_to_scale_invariant, scale_invariant_to_metric
from .geometry import Intrinsics
from .metrics import MetricConfig, UndefinedAPError, evaluate
from .ordinal import DATASET_SCHEMES, assign_label, make_scheme, ordinal_loss, ordinal_loss_grad, reverse_gradient
from .pnm import read_pnm, write_pnm
from .scene import (
    RIG_STYLES,
    RunConfig,
    dumps_canonical,
    generate_synthetic_scene,
    pose_to_dict,
    records_from_dict,
    render_pattern_image,
    run_config_from_dict,
    scene_from_dict,
    scene_to_dict,
)
from .selftest import run_selftest

__all__ = ["main"]


class InputError(ValueError):
    """Bad file contents or inconsistent flags; maps to exit code 2."""


def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _out_dir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_run_config(args) -> RunConfig:
    if getattr(args, "config", None):
        return run_config_from_dict(_load_json(args.config))
    return RunConfig()


def _perturbation(args, cfg: RunConfig) -> PerturbationRange:
    base = cfg.perturbation
    return PerturbationRange(
        d_yaw=base.d_yaw if args.d_yaw is None else args.d_yaw,
        d_pitch=base.d_pitch if args.d_pitch is None else args.d_pitch,
        d_roll=base.d_roll if args.d_roll is None else args.d_roll,
        seed=base.seed if args.seed is None else args.seed,
    )


def _cmd_gen_scene(args) -> int:
    out = _out_dir(args)
    seed = 0 if args.seed is None else args.seed
    scene = generate_synthetic_scene(seed, args.cameras, args.boxes, args.style)
    if args.with_images:
        image_dir = out / "images"
        image_dir.mkdir(exist_ok=True)
        paths = []
        for index, cam in enumerate(scene.cameras):
            name = f"images/{cam.camera_id}.pgm"
            write_pnm(out / name, render_pattern_image(cam.intrinsics.width, cam.intrinsics.height, index))
            paths.append(name)
        scene = type(scene)(scene.scene_id, scene.cameras, scene.boxes, tuple(paths))
    scene_path = out / "scene.json"
    scene_path.write_text(dumps_canonical(scene_to_dict(scene)), encoding="utf-8")
    print(scene_path)
    return 0


def _load_scene_images(scene, scene_path: str):
    if scene.image_paths is None:
        raise InputError(f"{scene_path}: scene has no image_paths; generate with --with-images")
    base = Path(scene_path).parent
    return [read_pnm(base / p) for p in scene.image_paths]


def _cmd_augment(args) -> int:
    cfg = _load_run_config(args)
    scene = scene_from_dict(_load_json(args.scene))
    images = _load_scene_images(scene, args.scene)
    limits = _perturbation(args, cfg)
    out = _out_dir(args)

    views = augment_scene(scene.cameras, images, scene.boxes, limits, workers=args.workers)
    image_dir = out / "augmented"
    image_dir.mkdir(exist_ok=True)
    poses = []
    homographies = []
    for cam, view in zip(scene.cameras, views):
        write_pnm(image_dir / f"{cam.camera_id}.pgm", view.image)
        poses.append({"camera_id": cam.camera_id, "pose": pose_to_dict(view.pose)})
        homographies.append(
            {
                "camera_id": cam.camera_id,
                "matrix_row_major": view.homography.row_major(),
                "provenance": view.homography.provenance,
            }
        )
    (out / "poses.json").write_text(dumps_canonical({"schema_version": 1, "poses": poses}), encoding="utf-8")
    (out / "homographies.json").write_text(
        dumps_canonical({"schema_version": 1, "homographies": homographies}), encoding="utf-8"
    )
    print(out)
    return 0


def _cmd_homography(args) -> int:
    cfg = _load_run_config(args)
    scene = scene_from_dict(_load_json(args.scene))
    limits = _perturbation(args, cfg)
    out = _out_dir(args)

    entries = []
    for index, cam in enumerate(scene.cameras):
        rng = np.random.default_rng([limits.seed, index])
        perturbed = perturb_pose(cam.pose, limits, rng)
        pairs = collect_pairs(cam, perturbed, scene.boxes)
        fitted = fit_homography(pairs)
        closed_form = analytic_homography(cam, perturbed)
        if len(pairs):
            residual = float(np.max(np.linalg.norm(fitted.apply(pairs.source) - pairs.target, axis=1)))
        else:
            residual = None
        entries.append(
            {
                "camera_id": cam.camera_id,
                "num_pairs": len(pairs),
                "fitted": {"matrix_row_major": fitted.row_major(), "provenance": fitted.provenance},
                "analytic_pure_rotation": {"matrix_row_major": closed_form.row_major()},
                "max_reprojection_residual_px": residual,
                "perturbed_pose": pose_to_dict(perturbed),
            }
        )
    path = out / "homographies.json"
    path.write_text(dumps_canonical({"schema_version": 1, "cameras": entries}), encoding="utf-8")
    print(path)
    return 0


def _depth_config(args) -> DepthDecouplingConfig:
    depth_range = None
    if args.dataset:
        depth_range = DATASET_DEPTH_RANGES[args.dataset]
    if args.depth_min is not None or args.depth_max is not None:
        if args.depth_min is None or args.depth_max is None:
            raise InputError("--depth-min and --depth-max must be given together")
        depth_range = (args.depth_min, args.depth_max)
    if args.c is not None:
        kwargs = {"reference_pixel_size": args.c}
        if depth_range is not None:
            kwargs["metric_depth_range"] = depth_range
        return DepthDecouplingConfig(**kwargs)
    return DepthDecouplingConfig.from_reference_focal(args.f_ref, depth_range)


def _cmd_depth_convert(args) -> int:
    cfg = _depth_config(args)
    intr = Intrinsics(fx=args.fx, fy=args.fy, px=0.0, py=0.0, width=1, height=1)
    if args.direction == "to-scale-invariant":
        converted = [metric_to_scale_invariant(v, intr, cfg) for v in args.values]
    else:
        converted = [scale_invariant_to_metric(v, intr, cfg) for v in args.values]
    print(
        dumps_canonical(
            {
                "direction": args.direction,
                "fx": args.fx,
                "fy": args.fy,
                "reference_pixel_size": cfg.reference_pixel_size,
                "values": list(args.values),
                "converted": converted,
            }
        ),
        end="",
    )
    return 0


def _cmd_bin_focal(args) -> int:
    if args.dataset:
        scheme = DATASET_SCHEMES[args.dataset]
    else:
        scheme = make_scheme(args.alpha, args.beta, args.subintervals)
    labels = [assign_label(scheme, focal) for focal in args.focals]
    print(
        dumps_canonical(
            {
                "thresholds": list(scheme.thresholds),
                "num_categories": scheme.num_categories,
                "focals": list(args.focals),
                "labels": labels,
            }
        ),
        end="",
    )
    return 0


def _cmd_ordinal_loss(args) -> int:
    data = _load_json(args.logits_json)
    if "logits" not in data:
        raise InputError(f"{args.logits_json}: expected an object with a 'logits' array")
    logits = [float(v) for v in data["logits"]]
    loss = ordinal_loss(logits, args.label)
    grad = ordinal_loss_grad(logits, args.label)
    result = {"label": args.label, "loss": loss, "gradient": [float(g) for g in grad]}
    if args.grl_lambda is not None:
        result["reversed_gradient"] = [float(g) for g in reverse_gradient(grad, args.grl_lambda)]
    print(dumps_canonical(result), end="")
    return 0


def _metric_config(args, cfg: RunConfig) -> MetricConfig:
    if args.metrics_config:
        data = _load_json(args.metrics_config)
        return MetricConfig(
            distance_thresholds=tuple(data.get("distance_thresholds", MetricConfig.distance_thresholds)),
            tp_threshold=data.get("tp_threshold", MetricConfig.tp_threshold),
            range_limit=data.get("range_limit", MetricConfig.range_limit),
            recall_floor=data.get("recall_floor", MetricConfig.recall_floor),
            precision_floor=data.get("precision_floor", MetricConfig.precision_floor),
        )
    return cfg.metrics


def _format_report_table(report) -> str:
    rows = [
        ("mAP", report.m_ap),
        ("mATE", report.m_ate),
        ("mASE", report.m_ase),
        ("mAOE", report.m_aoe),
        ("NDS*", report.nds_star),
    ]
    lines = [f"{'metric':<10}{'value':>10}"]
    for name, value in rows:
        lines.append(f"{name:<10}{value:>10.4f}")
    for threshold, ap in sorted(report.per_threshold_ap.items()):
        lines.append(f"{'AP@' + format(threshold, 'g'):<10}{ap:>10.4f}")
    return "\n".join(lines)


def _cmd_evaluate(args) -> int:
    cfg = _load_run_config(args)
    gts = records_from_dict(_load_json(args.gt))
    dets = records_from_dict(_load_json(args.pred))
    metric_cfg = _metric_config(args, cfg)
    try:
        report = evaluate(gts, dets, metric_cfg, workers=args.workers)
    except UndefinedAPError as exc:
        raise InputError(str(exc)) from exc
    out = _out_dir(args)
    report_path = out / "metric_report.json"
    report_path.write_text(dumps_canonical(report.to_dict()), encoding="utf-8")
    print(_format_report_table(report))
    return 0


def _cmd_selftest(args) -> int:
    report = run_selftest(seed=0 if args.seed is None else args.seed)
    for line in report.lines():
        print(line)
    passed = sum(r.passed for r in report.results)
    print(f"{passed}/{len(report.results)} checks passed")
    return 0 if report.all_passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bevkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, output_dir=True):
        p.add_argument("--seed", type=int, default=None, help="seed overriding the config value")
        p.add_argument("--config", default=None, help="run-config JSON path")
        if output_dir:
            p.add_argument("--output-dir", default=".", help="directory for output files")

    p = sub.add_parser("gen-scene", help="generate a deterministic synthetic scene")
    add_common(p)
    p.add_argument("--cameras", type=int, default=6, choices=(5, 6))
    p.add_argument("--boxes", type=int, default=12)
    p.add_argument("--style", default="ring", help=f"rig layout, one of {RIG_STYLES}")
    p.add_argument("--with-images", action="store_true", help="also write pattern rasters")
    p.set_defaults(func=_cmd_gen_scene)

    p = sub.add_parser("augment", help="perturb poses and warp scene images")
    add_common(p)
    p.add_argument("--scene", required=True)
    p.add_argument("--d-yaw", type=float, default=None)
    p.add_argument("--d-pitch", type=float, default=None)
    p.add_argument("--d-roll", type=float, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("homography", help="fit and report per-camera homographies")
    add_common(p)
    p.add_argument("--scene", required=True)
    p.add_argument("--d-yaw", type=float, default=None)
    p.add_argument("--d-pitch", type=float, default=None)
    p.add_argument("--d-roll", type=float, default=None)
    p.set_defaults(func=_cmd_homography)

    p = sub.add_parser("depth-convert", help="convert metric and scale-invariant depth")
    add_common(p, output_dir=False)
    p.add_argument("--direction", required=True, choices=("to-scale-invariant", "to-metric"))
    p.add_argument("--fx", type=float, required=True)
    p.add_argument("--fy", type=float, required=True)
    p.add_argument("--f-ref", type=float, default=707.0, help="reference focal length defining c")
    p.add_argument("--c", type=float, default=None, help="explicit reference pixel size (overrides --f-ref)")
    p.add_argument("--dataset", choices=sorted(DATASET_DEPTH_RANGES), default=None)
    p.add_argument("--depth-min", type=float, default=None)
    p.add_argument("--depth-max", type=float, default=None)
    p.add_argument("--values", type=float, nargs="+", required=True)
    p.set_defaults(func=_cmd_depth_convert)

    p = sub.add_parser("bin-focal", help="map focal lengths to pseudo-domain labels")
    add_common(p, output_dir=False)
    p.add_argument("--alpha", type=float, default=500.0)
    p.add_argument("--beta", type=float, default=750.0)
    p.add_argument("--subintervals", type=int, default=5)
    p.add_argument("--dataset", choices=sorted(DATASET_SCHEMES), default=None)
    p.add_argument("--focals", type=float, nargs="+", required=True)
    p.set_defaults(func=_cmd_bin_focal)

    p = sub.add_parser("ordinal-loss", help="evaluate the ordinal loss and its gradient")
    add_common(p, output_dir=False)
    p.add_argument("--logits-json", required=True, help="JSON file with a 'logits' array")
    p.add_argument("--label", type=int, required=True)
    p.add_argument("--grl-lambda", type=float, default=None, help="also emit the reversed gradient")
    p.set_defaults(func=_cmd_ordinal_loss)

    p = sub.add_parser("evaluate", help="score detections against ground truth")
    add_common(p)
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--metrics-config", default=None, help="metric-config JSON path")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("selftest", help="run the built-in oracle checks")
    add_common(p, output_dir=False)
    p.set_defaults(func=_cmd_selftest)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
