"""Grasping-strategy scripts and their kinematic playback.

Nine elephant-style strategies ship as JSON data files: ordered keyframes
of base pose, cable command and gripper aperture, split into reaching,
prehension, transport and release phases.  Playback runs each keyframe
through the gravity and actuation models and returns world-frame shapes;
the rigid carrier arm is abstracted as the base pose provider.

Commands in the scripts are sized as fractions of the single-cable
shortening budget so the same script plays back on any manipulator
scale; absolute millimetres are also accepted.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import DomainError
from .manipulator import ManipulatorSpec
from .actuation import (ActuationCommand, BackboneShape, command_configuration,
                        actuate_from_rest, total_cable_budget)
from .gravity import solve_rest_shape

PHASES = ("reaching", "prehension", "transport", "release")
MOTION_CLASSES = ("bending", "twisting")


@dataclass(frozen=True)
class Keyframe:
    """One scripted waypoint: where the base is, what the cables do."""

    phase: str
    dwell: str
    position_mm: np.ndarray
    rpy_rad: np.ndarray  # roll, pitch, yaw of the base; pitch tips the axis down
    command: dict
    aperture: float

    def __post_init__(self):
        if self.phase not in PHASES:
            raise DomainError(f"unknown phase {self.phase!r}")
        if not 0.0 <= self.aperture <= 1.0:
            raise DomainError(f"aperture {self.aperture} outside [0, 1]")

    def base_pose(self) -> np.ndarray:
        """Homogeneous world pose of the manipulator base."""
        roll, pitch, yaw = self.rpy_rad
        cr, sr = math.cos(roll), math.sin(roll)
        cp, sp = math.cos(pitch), math.sin(pitch)
        cy, sy = math.cos(yaw), math.sin(yaw)
        rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
        ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
        rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
        pose = np.eye(4)
        pose[:3, :3] = rz @ ry @ rx
        pose[:3, 3] = self.position_mm
        return pose

    def tilt_rad(self) -> float:
        """Base-axis angle below horizontal implied by the pose."""
        axis = self.base_pose()[:3, 0]
        return math.asin(max(-1.0, min(1.0, -axis[2])))

    def resolve_command(self, spec: ManipulatorSpec) -> ActuationCommand:
        cmd = self.command
        budget = total_cable_budget(spec)

        def amount(prefix):
            if f"{prefix}_mm" in cmd:
                return float(cmd[f"{prefix}_mm"])
            return float(cmd[f"{prefix}_frac"]) * budget

        cable2 = cmd.get("cable2")
        return ActuationCommand(
            cable=cmd["cable"],
            shorten_mm=amount("shorten"),
            cable2=cable2,
            shorten2_mm=amount("shorten2") if cable2 else 0.0,
        )


@dataclass(frozen=True)
class StrategyScript:
    """A named grasping strategy as an ordered keyframe list."""

    name: str
    strategy_index: int
    description: str
    motion_class: str
    object_size_mm: tuple | None
    keyframes: tuple

    def __post_init__(self):
        if not self.keyframes:
            raise DomainError(f"strategy {self.name!r} has no keyframes")
        if self.motion_class not in MOTION_CLASSES:
            raise DomainError(f"unknown motion class {self.motion_class!r}")


def _script_from_dict(d: dict) -> StrategyScript:
    frames = []
    for kf in d["keyframes"]:
        frames.append(Keyframe(
            phase=kf["phase"],
            dwell=kf.get("dwell", ""),
            position_mm=np.asarray(kf["base_pose"]["position_mm"], float),
            rpy_rad=np.radians(np.asarray(kf["base_pose"]["rpy_deg"], float)),
            command=dict(kf["command"]),
            aperture=float(kf["aperture"]),
        ))
    size = d.get("object_size_mm")
    return StrategyScript(
        name=d["name"],
        strategy_index=int(d["strategy_index"]),
        description=d["description"],
        motion_class=d["motion_class"],
        object_size_mm=tuple(size) if size else None,
        keyframes=tuple(frames),
    )


def _data_dir():
    return resources.files("spirokin").joinpath("strategies")


def available_strategies() -> list[str]:
    names = []
    for entry in _data_dir().iterdir():
        if entry.name.endswith(".json"):
            names.append(entry.name[:-5])
    return sorted(names)


def get_strategy(name: str) -> StrategyScript:
    """Load a bundled strategy script by name."""
    path = _data_dir().joinpath(f"{name}.json")
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DomainError(
            f"unknown strategy {name!r}; available: "
            f"{', '.join(available_strategies())}"
        ) from None
    script = _script_from_dict(json.loads(text))
    if script.name != name:
        raise DomainError(f"script file {name}.json declares name {script.name!r}")
    return script


@dataclass(frozen=True)
class PlaybackFrame:
    """One evaluated keyframe: world-frame shape plus bookkeeping."""

    phase: str
    dwell: str
    base_pose: np.ndarray
    shape: BackboneShape
    aperture: float
    saturated_joints: int
    command: ActuationCommand


def playback(script: StrategyScript, spec: ManipulatorSpec) -> list[PlaybackFrame]:
    """Evaluate every keyframe of a script against a manipulator spec.

    Each keyframe solves the rest shape for the base tilt implied by its
    pose, composes the cable command on top, and places the result at the
    world base pose.
    """
    frames = []
    rest_cache: dict[float, object] = {}
    for kf in script.keyframes:
        tilt = kf.tilt_rad()
        key = round(tilt, 12)
        if key not in rest_cache:
            rest_cache[key] = solve_rest_shape(spec, tilt)
        rest = rest_cache[key]
        command = kf.resolve_command(spec)
        config = command_configuration(spec, command)
        shape = actuate_from_rest(spec, rest, command)
        pose = kf.base_pose()
        frames.append(PlaybackFrame(
            phase=kf.phase,
            dwell=kf.dwell,
            base_pose=pose,
            shape=shape.transformed(pose),
            aperture=kf.aperture,
            saturated_joints=int(np.sum(config.saturated)),
            command=command,
        ))
    return frames
