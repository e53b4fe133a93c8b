"""Comparison of predicted backbone shapes against recorded marker traces.

A trace is a time-indexed set of marker-frame positions (one rigid-body
frame per instrumented section).  The trace is registered to the model
with a single least-squares rigid transform, then per-step RMSE and
per-section error distributions are reported.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

TRACE_HEADER = ["step", "frame", "x_mm", "y_mm", "z_mm"]


@dataclass(frozen=True)
class Trace:
    """Marker positions keyed by (step, frame_id)."""

    positions: dict
    steps: tuple = field(init=False)

    def __post_init__(self):
        for key, p in self.positions.items():
            arr = np.asarray(p, dtype=float)
            if arr.shape != (3,) or not np.all(np.isfinite(arr)):
                raise DomainError(f"bad position for {key}: {p}")
        object.__setattr__(self, "steps",
                           tuple(sorted({s for s, _ in self.positions})))

    def frames_at(self, step) -> list:
        return sorted(f for s, f in self.positions if s == step)


def load_trace_csv(source) -> Trace:
    """Read a trace from a path or file object (step,frame,x_mm,y_mm,z_mm)."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8", newline="") as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != TRACE_HEADER:
        raise DomainError(
            f"trace header must be {','.join(TRACE_HEADER)}, got {header}")
    positions = {}
    for row in reader:
        if not row:
            continue
        step, frame = int(row[0]), int(row[1])
        positions[(step, frame)] = np.array(
            [float(row[2]), float(row[3]), float(row[4])])
    if not positions:
        raise DomainError("trace contains no rows")
    return Trace(positions=positions)


def save_trace_csv(trace: Trace, path) -> None:
    lines = [",".join(TRACE_HEADER)]
    for (step, frame) in sorted(trace.positions):
        x, y, z = trace.positions[(step, frame)]
        lines.append(f"{step},{frame},{x!r},{y!r},{z!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def average_traces(a: Trace, b: Trace) -> Trace:
    """Frame-wise mean of two repeat runs; keys must match exactly."""
    if set(a.positions) != set(b.positions):
        raise DomainError("traces do not cover the same (step, frame) keys")
    return Trace(positions={k: 0.5 * (a.positions[k] + b.positions[k])
                            for k in a.positions})


def transform_trace(trace: Trace, rotation, translation) -> Trace:
    r = np.asarray(rotation, float)
    t = np.asarray(translation, float)
    return Trace(positions={k: r @ p + t for k, p in trace.positions.items()})


def rigid_align(model_points, trace_points):
    """Least-squares rigid transform taking trace points onto model points.

    Returns (rotation, translation) such that rotation @ p + translation
    approximates the matched model point.  Standard SVD solution with the
    determinant correction; rejects degenerate (collinear or tiny) sets.
    """
    a = np.asarray(trace_points, dtype=float)
    b = np.asarray(model_points, dtype=float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] != 3:
        raise DomainError("point sets must both be (n, 3)")
    if a.shape[0] < 3:
        raise DomainError("need at least 3 point pairs")
    ca, cb = a.mean(axis=0), b.mean(axis=0)
    h = (a - ca).T @ (b - cb)
    u, s, vt = np.linalg.svd(h)
    if s[1] < 1e-9 * max(s[0], 1.0):
        raise DomainError("degenerate geometry: points are collinear")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    t = cb - r @ ca
    return r, t


@dataclass(frozen=True)
class ComparisonReport:
    """Accuracy summary of a model-vs-trace comparison, all in mm."""

    per_step_rmse: dict
    per_section_errors: dict
    mean_rmse: float
    max_deviation: float
    rotation: np.ndarray
    translation: np.ndarray
    dropped: dict
    per_step_transforms: dict | None = None

    def to_dict(self) -> dict:
        return {
            "per_step_rmse": {str(k): v for k, v in self.per_step_rmse.items()},
            "per_section_errors": {
                str(k): list(v) for k, v in self.per_section_errors.items()},
            "mean_rmse": self.mean_rmse,
            "max_deviation": self.max_deviation,
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
            "dropped": {str(k): v for k, v in self.dropped.items()},
        }


def compare(model_points, trace: Trace, frame_to_section: dict,
            per_step_align: bool = False) -> ComparisonReport:
    """Compare per-step model marker positions against a trace.

    model_points: {step: {section_index: xyz}} predicted marker positions.
    frame_to_section maps trace frame ids to model section indices.
    One rigid transform registers the whole trace (per_step_align fits
    one per step instead, for diagnostics).  Trace frames missing from a
    step are dropped from that step's RMSE and counted in `dropped`.
    """
    steps = sorted(model_points)
    if list(steps) != list(trace.steps):
        raise DomainError(
            f"step mismatch: model has {list(steps)}, trace has "
            f"{list(trace.steps)}")

    pairs = {}  # step -> (model (n,3), trace (n,3), sections)
    dropped = {}
    for step in steps:
        mp, tp, secs = [], [], []
        expected = set(frame_to_section)
        present = set(trace.frames_at(step))
        for frame in sorted(expected & present):
            section = frame_to_section[frame]
            if section not in model_points[step]:
                raise DomainError(
                    f"model step {step} lacks section {section}")
            mp.append(model_points[step][section])
            tp.append(trace.positions[(step, frame)])
            secs.append(section)
        n_missing = len(expected - present)
        if n_missing:
            dropped[step] = n_missing
        if len(mp) < 3:
            raise DomainError(f"step {step} has fewer than 3 usable frames")
        pairs[step] = (np.asarray(mp), np.asarray(tp), secs)

    per_step_transforms = None
    if per_step_align:
        per_step_transforms = {s: rigid_align(m, t)
                               for s, (m, t, _) in pairs.items()}
        rot, tr = per_step_transforms[steps[0]]
    else:
        all_model = np.concatenate([pairs[s][0] for s in steps])
        all_trace = np.concatenate([pairs[s][1] for s in steps])
        rot, tr = rigid_align(all_model, all_trace)

    per_step_rmse = {}
    per_section = {}
    max_dev = 0.0
    for step in steps:
        m, t, secs = pairs[step]
        r_s, t_s = (per_step_transforms[step] if per_step_align else (rot, tr))
        aligned = t @ r_s.T + t_s
        err = np.linalg.norm(aligned - m, axis=1)
        per_step_rmse[step] = float(np.sqrt(np.mean(err**2)))
        max_dev = max(max_dev, float(err.max()))
        for sec, e in zip(secs, err):
            per_section.setdefault(sec, []).append(float(e))

    mean_rmse = float(np.mean(list(per_step_rmse.values())))
    return ComparisonReport(per_step_rmse=per_step_rmse,
                            per_section_errors=per_section,
                            mean_rmse=mean_rmse, max_deviation=max_dev,
                            rotation=rot, translation=tr, dropped=dropped,
                            per_step_transforms=per_step_transforms)
