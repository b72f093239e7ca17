"""``detgrasp`` command line.

Every subcommand prints one JSON document on stdout. Exit codes: 0 success,
2 for domain errors (unknown label, no grasp in box, unreadable input),
1 for internal failures.
"""
from __future__ import annotations

import argparse
import sys
from importlib import resources

import numpy as np

from .. import checks
from .._backend import BACKEND
from ..attention import params_from_dict
from ..dgbcm import DomainError, dgbcm_select, index_detections
from ..frames import CalibrationError, calibration_from_dict, grasp_to_robot
from ..geometry import Thresholds
from ..gradcheck import grad_check
from .evaluate import evaluate_dataset
from .formats import (
    FORMAT_VERSION,
    FormatError,
    detections_from_dict,
    dumps,
    grasps_from_dict,
    read_json,
    scenes_from_dict,
    scenes_to_dict,
    tensor_from_json,
    write_json,
)
from .synth import PRNG, SceneSpec, gen_scenes


def _emit(obj, stream=None):
    (stream or sys.stdout).write(dumps(obj))


def _fixture(name):
    import json

    return json.loads(resources.files("detgrasp").joinpath("data", name).read_text())


def fixture_checks(seed):
    """Grad checks of the three attention modules at the shipped parameters."""
    f = tensor_from_json(_fixture("feature_map.json"))
    out = []
    for name, make in (("cam", checks.cam_op), ("sam", checks.sam_op), ("aspp", checks.aspp_op)):
        params = params_from_dict(_fixture(f"{name}_params.json"))
        report = grad_check(make(params), [f] + params.arrays(), seed=seed)
        report.name = f"fixture:{report.name}"
        out.append(report)
    return out


def cmd_gradcheck(args):
    names = args.op or list(checks.BUILDERS)
    unknown = sorted(set(names) - set(checks.BUILDERS))
    if unknown:
        raise FormatError(f"unknown operation(s) {unknown}; choose from {sorted(checks.BUILDERS)}")
    rows = []
    for name in names:
        reports = [checks.run_check(name, seed) for seed in range(args.seeds)]
        rows.append(_summarize(name, reports))
    if not args.no_fixtures:
        reports = [fixture_checks(seed) for seed in range(args.seeds)]
        for k, name in enumerate(("fixture:cam", "fixture:sam", "fixture:aspp")):
            rows.append(_summarize(name, [r[k] for r in reports]))
    ok = all(r["passed"] for r in rows)
    _emit({"format_version": FORMAT_VERSION, "backend": BACKEND, "seeds": args.seeds, "passed": ok, "checks": rows})
    return 0 if ok else 1


def _summarize(name, reports):
    worst = max(reports, key=lambda r: r.max_rel_error)
    return {
        "op": name,
        "passed": all(r.passed for r in reports),
        "max_rel_error": worst.max_rel_error,
        "worst_seed": worst.seed,
        "worst_location": None if worst.location is None else list(worst.location),
        "failed_seeds": [r.seed for r in reports if not r.passed],
    }


def cmd_match(args):
    _, boxes = detections_from_dict(read_json(args.detections))
    grasps = grasps_from_dict(read_json(args.grasps))
    result = dgbcm_select(index_detections(boxes), grasps, args.target)
    _emit({"format_version": FORMAT_VERSION, **result.to_dict(label=args.target)})
    return 0


def cmd_eval(args):
    scenes = scenes_from_dict(read_json(args.scenes))
    thresholds = Thresholds(args.iou, args.angle_deg, args.height_ratio)
    _emit(evaluate_dataset(scenes, thresholds, workers=args.threads))
    return 0


def cmd_gen_scenes(args):
    spec = SceneSpec()
    scenes = gen_scenes(args.seed, args.count, spec, workers=args.threads)
    meta = {"seed": args.seed, "count": args.count, "prng": PRNG}
    write_json(args.out, scenes_to_dict(scenes, meta))
    _emit({"format_version": FORMAT_VERSION, "out": args.out, **meta})
    return 0


def cmd_transform(args):
    try:
        cam, T = calibration_from_dict(read_json(args.calib))
    except CalibrationError as exc:
        raise FormatError(str(exc)) from None
    if not args.depth > 0:
        raise FormatError(f"depth must be positive, got {args.depth}")
    grasps = grasps_from_dict(read_json(args.grasp))
    robot = [grasp_to_robot(g, args.depth, cam, T).to_dict() for g in grasps]
    _emit({
        "format_version": FORMAT_VERSION,
        "depth": args.depth,
        "assumption": "top-down camera; width converted with fx",
        "grasps": robot,
    })
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="detgrasp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gradcheck", help="finite-difference check of every differentiable kernel")
    g.add_argument("--seeds", type=int, default=20)
    g.add_argument("--op", action="append", help="restrict to this operation (repeatable)")
    g.add_argument("--no-fixtures", action="store_true", help="skip the shipped attention fixtures")
    g.set_defaults(func=cmd_gradcheck)

    m = sub.add_parser("match", help="select the best grasp inside a target label's boxes")
    m.add_argument("--detections", required=True)
    m.add_argument("--grasps", required=True)
    m.add_argument("--target", required=True)
    m.set_defaults(func=cmd_match)

    e = sub.add_parser("eval", help="grasp accuracy over a scenes file")
    e.add_argument("--scenes", required=True)
    e.add_argument("--iou", type=float, default=0.25)
    e.add_argument("--angle-deg", type=float, default=30.0)
    e.add_argument("--height-ratio", type=float, default=0.5)
    e.add_argument("--threads", type=int, default=1)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("gen-scenes", help="write seeded synthetic scenes")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--threads", type=int, default=1)
    s.set_defaults(func=cmd_gen_scenes)

    t = sub.add_parser("transform", help="map pixel grasps into the robot frame")
    t.add_argument("--calib", required=True)
    t.add_argument("--grasp", required=True)
    t.add_argument("--depth", type=float, required=True)
    t.set_defaults(func=cmd_transform)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DomainError as exc:
        _emit({"error": {"kind": exc.kind, "detail": exc.detail}})
        return 2
    except Exception as exc:  # noqa: BLE001
        _emit({"error": {"kind": "InternalError", "detail": f"{type(exc).__name__}: {exc}"}})
        return 1


if __name__ == "__main__":
    sys.exit(main())
