"""Command-line entry point.

Subcommands: design, rest, bend, twist, sweep, calibrate, strategy,
compare.  Flags take degrees and millimetres; everything internal is
radians.  Exit codes: 0 success, 1 usage error, 2 domain or solver
error (printed as a single machine-parseable line on stderr).  All file
outputs are written atomically.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import SpirokinError, DomainError
from . import spiral
from .manipulator import (CABLES, ManipulatorSpec, MaterialConstants,
                          build_spec)
from . import actuation
from .gravity import solve_rest_shape, rest_shape, tilt_transform
from . import strategies as strategy_lib
from .calibration import SlackModel, compensation_factor, adjusted_schedule
from . import validation

log = logging.getLogger("spirokin")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}


@dataclass
class RunConfig:
    """Shared run settings carried across subcommand helpers."""

    spec_path: str | None = None
    out_dir: str | None = None
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    verbosity: str = "warn"


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1; domain/solver problems exit 2
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: usage: {message}\n")
        raise SystemExit(1)


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".spirokin-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_spec(path: str) -> ManipulatorSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return ManipulatorSpec.from_json(fh.read())
    except FileNotFoundError:
        raise DomainError(f"spec file not found: {path}") from None


def _shape_csv(shape: actuation.BackboneShape, angles_rad) -> str:
    """Rows: joint_index, angle_deg, frame position; base row 0, tip row last."""
    lines = ["joint_index,angle_deg,frame_x_mm,frame_y_mm,frame_z_mm"]
    pos = shape.positions
    n = len(pos)
    for i in range(n):
        if 1 <= i <= len(angles_rad):
            ang = math.degrees(float(angles_rad[i - 1]))
        else:
            ang = 0.0
        x, y, z = pos[i]
        lines.append(f"{i},{ang:.9g},{x:.6f},{y:.6f},{z:.6f}")
    return "\n".join(lines) + "\n"


def _read_shape_positions(path: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["joint_index", "angle_deg"]:
            raise DomainError(f"{path} is not a shape CSV")
        rows = [[float(r[2]), float(r[3]), float(r[4])] for r in reader if r]
    return np.asarray(rows)


def _obj_text(verts: np.ndarray, faces: np.ndarray) -> str:
    lines = []
    for v in verts:
        lines.append(f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}")
    for f in faces:
        lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    return "\n".join(lines) + "\n"


# -- subcommands ---------------------------------------------------------------

def _cmd_design(args, cfg: RunConfig) -> int:
    constraints = spiral.DesignConstraints(
        m=args.m, r_rigid=args.r_rigid, r_soft=args.r_soft)
    theta_start = math.radians(args.theta_start)
    params = spiral.solve_design_parameters(
        constraints,
        delta_theta=math.radians(args.delta_theta),
        theta_start=theta_start,
        theta_end=theta_start + math.radians(args.theta_span),
    )
    profile = spiral.discretize_profile(params)
    doc = {
        "params": {
            "a": params.a, "b": params.b, "k": params.k,
            "delta_theta": params.delta_theta,
            "theta_start": params.theta_start,
            "theta_end": params.theta_end,
        },
        "k_p": params.k_p,
        "sections": profile.cross_sections.tolist(),
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        _atomic_write(args.out, text)
        log.info("wrote %s", args.out)
    else:
        sys.stdout.write(text)

    if args.mesh:
        verts, faces = spiral.revolve_mesh(profile, segments=args.mesh_segments)
        _atomic_write(args.mesh, _obj_text(verts, faces))
        log.info("wrote %s", args.mesh)

    if args.spec_out:
        material = MaterialConstants(youngs_modulus=args.youngs_modulus_mpa,
                                     density=args.density_g_cm3)
        spec = build_spec(profile, material, joint_fraction=args.joint_fraction)
        _atomic_write(args.spec_out, spec.to_json() + "\n")
        log.info("wrote %s", args.spec_out)
    return 0


def _cmd_rest(args, cfg: RunConfig) -> int:
    spec = _load_spec(args.spec)
    tilt = math.radians(args.tilt_deg)
    rest = solve_rest_shape(spec, tilt)
    shape = rest_shape(spec, rest).transformed(tilt_transform(tilt))
    _atomic_write(args.out, _shape_csv(shape, rest.joint_angles))
    return 0


def _composed_shape(spec, tilt, command):
    rest = solve_rest_shape(spec, tilt)
    shape = actuation.actuate_from_rest(spec, rest, command)
    return rest, shape.transformed(tilt_transform(tilt))


def _cmd_bend(args, cfg: RunConfig) -> int:
    spec = _load_spec(args.spec)
    command = actuation.ActuationCommand(cable=args.cable,
                                         shorten_mm=args.shorten_mm)
    config = actuation.command_configuration(spec, command)
    _, shape = _composed_shape(spec, math.radians(args.tilt_deg), command)
    _atomic_write(args.out, _shape_csv(shape, config.angles))
    return 0


def _cmd_twist(args, cfg: RunConfig) -> int:
    spec = _load_spec(args.spec)
    command = actuation.ActuationCommand(cable=args.cable1, shorten_mm=args.d1,
                                         cable2=args.cable2, shorten2_mm=args.d2)
    config = actuation.command_configuration(spec, command)
    _, shape = _composed_shape(spec, math.radians(args.tilt_deg), command)
    _atomic_write(args.out, _shape_csv(shape, config.angles))
    return 0


def _cmd_sweep(args, cfg: RunConfig) -> int:
    spec = _load_spec(args.spec)
    tilt = math.radians(args.tilt_deg)
    rest = solve_rest_shape(spec, tilt)
    world = tilt_transform(tilt)
    os.makedirs(args.out_dir, exist_ok=True)

    rest_rots = [actuation.rotation_about(actuation.GRAVITY_SAG_AXIS, a)
                 for a in rest.joint_angles]
    relax_rows = []
    schedule_rows = []
    prev_lengths = None
    for step in range(args.steps + 1):
        total = step * args.step_mm
        command = actuation.ActuationCommand(cable=args.cable, shorten_mm=total)
        config = actuation.command_configuration(spec, command)
        act_rots = config.rotations()
        rots = [rest_rots[j] @ act_rots[j] for j in range(spec.n_joints)]
        shape = actuation.forward_shape_from_rotations(spec, rots).transformed(world)
        path = os.path.join(args.out_dir, f"shape_step_{step:02d}.csv")
        _atomic_write(path, _shape_csv(shape, config.angles))

        lengths = actuation.passive_cable_lengths(spec, rots)
        if step > 0:
            schedule_rows.append((step, args.cable, args.step_mm))
            for cable in sorted(lengths):
                if cable == args.cable:
                    continue
                relax_rows.append(
                    (step, cable, lengths[cable] - prev_lengths[cable]))
        prev_lengths = lengths

    relax = ["step,cable,relax_mm"]
    relax += [f"{s},{c},{v:.6f}" for s, c, v in relax_rows]
    _atomic_write(os.path.join(args.out_dir, "relax.csv"),
                  "\n".join(relax) + "\n")
    sched = ["step,cable,delta_mm"]
    sched += [f"{s},{c},{v:.6f}" for s, c, v in schedule_rows]
    _atomic_write(os.path.join(args.out_dir, "schedule.csv"),
                  "\n".join(sched) + "\n")
    return 0


def _cmd_calibrate(args, cfg: RunConfig) -> int:
    parts = [p.strip() for p in args.slack_mm.split(",")]
    if len(parts) != 3:
        raise DomainError("--slack-mm wants three values: dorsal,ventral_left,"
                          "ventral_right")
    slack = {cable: float(v) for cable, v in zip(CABLES, parts)}
    model = SlackModel(slack_mm=slack, n_steps=args.steps)

    with open(args.schedule, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    if header != ["step", "cable", "delta_mm"]:
        raise DomainError("schedule header must be step,cable,delta_mm")

    by_cable: dict[str, list[int]] = {}
    for idx, row in enumerate(rows):
        by_cable.setdefault(row[1], []).append(idx)
    out_rows = [list(r) for r in rows]
    for cable, indices in by_cable.items():
        factor = compensation_factor(model, cable)
        deltas = np.array([float(rows[i][2]) for i in indices])
        adjusted = adjusted_schedule(deltas, factor)
        for i, v in zip(indices, adjusted):
            out_rows[i][2] = f"{v:.6f}"

    text = "step,cable,delta_mm\n" + "\n".join(",".join(r) for r in out_rows) + "\n"
    _atomic_write(args.out or args.schedule, text)
    return 0


def _cmd_strategy(args, cfg: RunConfig) -> int:
    if args.list:
        for name in strategy_lib.available_strategies():
            script = strategy_lib.get_strategy(name)
            sys.stdout.write(
                f"{script.strategy_index}. {name} [{script.motion_class}]: "
                f"{script.description}\n")
        return 0
    if not args.name or not args.spec or not args.out:
        raise DomainError("strategy playback needs --spec, --name and --out")
    spec = _load_spec(args.spec)
    script = strategy_lib.get_strategy(args.name)
    frames = strategy_lib.playback(script, spec)
    os.makedirs(args.out, exist_ok=True)

    manifest = {
        "name": script.name,
        "strategy_index": script.strategy_index,
        "description": script.description,
        "motion_class": script.motion_class,
        "object_size_mm": script.object_size_mm,
        "seed": cfg.seed,
        "keyframes": [],
    }
    for i, frame in enumerate(frames):
        fname = f"keyframe_{i:02d}.csv"
        config = actuation.command_configuration(spec, frame.command)
        _atomic_write(os.path.join(args.out, fname),
                      _shape_csv(frame.shape, config.angles))
        manifest["keyframes"].append({
            "csv": fname,
            "phase": frame.phase,
            "dwell": frame.dwell,
            "aperture": frame.aperture,
            "saturated_joints": frame.saturated_joints,
            "base_pose": frame.base_pose.tolist(),
            "command": {
                "cable": frame.command.cable,
                "shorten_mm": frame.command.shorten_mm,
                "cable2": frame.command.cable2,
                "shorten2_mm": frame.command.shorten2_mm,
            },
        })
    _atomic_write(os.path.join(args.out, "manifest.json"),
                  json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return 0


def _cmd_compare(args, cfg: RunConfig) -> int:
    trace = validation.load_trace_csv(args.trace)
    with open(args.mapping, "r", encoding="utf-8") as fh:
        mapping_doc = json.load(fh)
    frame_to_section = {int(k): int(v)
                        for k, v in mapping_doc["frame_to_section"].items()}

    model_points = {}
    for name in sorted(os.listdir(args.model_dir)):
        if not (name.startswith("shape_step_") and name.endswith(".csv")):
            continue
        step = int(name[len("shape_step_"):-len(".csv")])
        pos = _read_shape_positions(os.path.join(args.model_dir, name))
        # section s's proximal frame is row s-1; the final row is the tip end
        model_points[step] = {s: pos[s - 1] for s in range(1, len(pos) + 1)}
    if not model_points:
        raise DomainError(f"no shape_step_*.csv files in {args.model_dir}")

    report = validation.compare(model_points, trace, frame_to_section,
                                per_step_align=args.per_step_align)
    _atomic_write(args.out, json.dumps(report.to_dict(), indent=2,
                                       sort_keys=True) + "\n")
    return 0


# -- parser wiring -------------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(prog="spirokin",
                     description="Spiral-profile cable-driven soft manipulator "
                                 "kinematics")
    parser.add_argument("--seed", type=int, default=0,
                        help="random seed recorded in emitted artifacts")
    sub = parser.add_subparsers(dest="command", metavar="command",
                                parser_class=_Parser)

    p = sub.add_parser("design",
                       help="solve spiral parameters and emit the profile")
    p.add_argument("--m", type=float, default=1.53,
                   help="gripper-to-base graspable size ratio")
    p.add_argument("--r-rigid", type=float, default=28.0,
                   help="carrying arm end-link radius, mm")
    p.add_argument("--r-soft", type=float, default=None,
                   help="override the unit-profile base radius")
    p.add_argument("--delta-theta", type=float, default=30.0,
                   help="section discretization step, degrees")
    p.add_argument("--theta-span", type=float, default=540.0,
                   help="total polar-angle span, degrees")
    p.add_argument("--theta-start", type=float, default=90.0,
                   help="tip-end polar angle, degrees")
    p.add_argument("--out", help="write the design JSON here (default stdout)")
    p.add_argument("--mesh", help="write a revolved tube mesh (.obj)")
    p.add_argument("--mesh-segments", type=int, default=32)
    p.add_argument("--spec-out", help="also build and write a manipulator "
                                      "spec.json")
    p.add_argument("--youngs-modulus-mpa", type=float, default=16.9)
    p.add_argument("--density-g-cm3", type=float, default=1.22)
    p.add_argument("--joint-fraction", type=float, default=0.15)
    p.set_defaults(func=_cmd_design)

    p = sub.add_parser("rest",
                       help="resting shape under gravity")
    p.add_argument("--spec", required=True)
    p.add_argument("--tilt-deg", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_rest)

    p = sub.add_parser("bend",
                       help="single-cable bending shape")
    p.add_argument("--spec", required=True)
    p.add_argument("--cable", default="dorsal", choices=list(CABLES))
    p.add_argument("--shorten-mm", type=float, required=True)
    p.add_argument("--tilt-deg", type=float, default=90.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bend)

    p = sub.add_parser("twist",
                       help="two-cable twisting shape")
    p.add_argument("--spec", required=True)
    p.add_argument("--cable1", default="ventral_left", choices=list(CABLES))
    p.add_argument("--d1", type=float, required=True)
    p.add_argument("--cable2", default="ventral_right", choices=list(CABLES))
    p.add_argument("--d2", type=float, required=True)
    p.add_argument("--tilt-deg", type=float, default=90.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_twist)

    p = sub.add_parser("sweep",
                       help="stepwise tightening protocol emitter")
    p.add_argument("--spec", required=True)
    p.add_argument("--cable", default="dorsal", choices=list(CABLES))
    p.add_argument("--steps", type=int, default=26)
    p.add_argument("--step-mm", type=float, default=5.0)
    p.add_argument("--tilt-deg", type=float, default=90.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("calibrate",
                       help="apply slack compensation to a schedule CSV")
    p.add_argument("--slack-mm", required=True,
                   help="dorsal,ventral_left,ventral_right slack in mm")
    p.add_argument("--steps", type=int, default=26)
    p.add_argument("--schedule", required=True)
    p.add_argument("--out", help="write here instead of rewriting in place")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("strategy",
                       help="play back a grasping strategy")
    p.add_argument("--spec")
    p.add_argument("--name")
    p.add_argument("--out")
    p.add_argument("--list", action="store_true",
                   help="list available strategies")
    p.set_defaults(func=_cmd_strategy)

    p = sub.add_parser("compare",
                       help="compare model shapes against a marker trace")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--mapping", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--per-step-align", action="store_true")
    p.set_defaults(func=_cmd_compare)
    return parser


def main(argv=None) -> int:
    level = _LOG_LEVELS.get(os.environ.get("SPIROKIN_LOG", "warn").lower(),
                            logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    parser = _build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return 1
    cfg = RunConfig(seed=args.seed,
                    verbosity=os.environ.get("SPIROKIN_LOG", "warn"))
    try:
        return args.func(args, cfg)
    except SpirokinError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
