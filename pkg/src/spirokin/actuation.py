"""Cable-actuation kinematics: length distribution, bending and twisting.

Joint-local convention: x along the backbone toward the tip, the joint
center E at the origin.  A cable at rim angle alpha has direction
h(alpha) = (0, cos a, sin a) in the cross-section.  A joint pose is a
tilt: a rotation by beta about the in-plane axis w(gamma) = x cross
h(gamma), which bends the backbone toward the rim direction gamma.

Pulling one cable distributes the commanded shortening over the joints
by a fixed portion vector derived from the stiffness taper, closing each
joint's cable chord; chords that hit zero mark saturated joints (faces
in contact at the rotation limit) and the excess is redistributed.  A
second cable re-tilts the still-free joints without changing the first
cable's chords.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, SolverError
from .manipulator import ManipulatorSpec

X_HAT = np.array([1.0, 0.0, 0.0])


# -- elementary chord/angle relations ---------------------------------------

def angle_from_chord(hole_radius: float, chord: float) -> float:
    """Angle subtended at the joint center by a chord between two holes.

    Isoceles triangle with legs hole_radius: theta = 2*asin(X / 2R),
    equivalently acos((2R^2 - X^2) / 2R^2).
    """
    if hole_radius <= 0:
        raise DomainError("hole_radius must be positive")
    if chord < 0 or chord > 2 * hole_radius:
        raise DomainError(
            f"chord {chord} outside [0, {2 * hole_radius}] for R={hole_radius}"
        )
    return 2.0 * math.asin(chord / (2.0 * hole_radius))


def chord_from_angle(hole_radius: float, angle: float) -> float:
    """Inverse of angle_from_chord: X = 2R*sin(theta/2)."""
    if hole_radius <= 0:
        raise DomainError("hole_radius must be positive")
    if angle < 0 or angle > math.pi:
        raise DomainError(f"angle {angle} outside [0, pi]")
    return 2.0 * hole_radius * math.sin(angle / 2.0)


def cable_direction(alpha: float) -> np.ndarray:
    return np.array([0.0, math.cos(alpha), math.sin(alpha)])


def tilt_axis(gamma: float) -> np.ndarray:
    """Rotation axis for a bend toward rim direction gamma (unit vector)."""
    return np.array([0.0, -math.sin(gamma), math.cos(gamma)])


def rotation_about(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    x, y, z = axis
    c, s = math.cos(angle), math.sin(angle)
    omc = 1.0 - c
    return np.array([
        [c + x * x * omc, x * y * omc - z * s, x * z * omc + y * s],
        [y * x * omc + z * s, c + y * y * omc, y * z * omc - x * s],
        [z * x * omc - y * s, z * y * omc + x * s, c + z * z * omc],
    ])


def chord_of_tilt(gap: float, rim: float, alpha: float,
                  gamma: float, beta: float) -> float:
    """Chord of the cable at rim angle alpha under a tilt (gamma, beta).

    Closed form of |b - R(gamma, beta) c| for holes b, c at radius rim on
    parallel faces gap apart.  For alpha == gamma this reduces to the
    cosine-law bookkeeping and reaches zero exactly at the face-contact
    tilt 2*atan(gap / 2*rim).
    """
    ka = math.cos(alpha - gamma)
    sb, cb = math.sin(beta), math.cos(beta)
    dx = rim * ka * sb - 0.5 * gap * (1.0 + cb)
    dc = rim * ka * (1.0 - cb) - 0.5 * gap * sb
    return math.hypot(dx, dc)


# -- command and configuration types ----------------------------------------

@dataclass(frozen=True)
class ActuationCommand:
    """Per-cable shortening command; a second cable makes it a twist."""

    cable: str
    shorten_mm: float
    cable2: str | None = None
    shorten2_mm: float = 0.0

    def __post_init__(self):
        if self.shorten_mm < 0 or self.shorten2_mm < 0:
            raise DomainError("cable shortenings must be non-negative")
        if self.cable2 is not None and self.cable2 == self.cable:
            raise DomainError("twist requires two distinct cables")


@dataclass(frozen=True)
class JointConfiguration:
    """Per-joint rotation axes (unit, joint-local), angles and saturation."""

    axes: np.ndarray
    angles: np.ndarray
    saturated: np.ndarray

    def __post_init__(self):
        norms = np.linalg.norm(self.axes, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise DomainError("rotation axes must be unit vectors")

    @property
    def n_joints(self) -> int:
        return len(self.angles)

    def rotations(self) -> list[np.ndarray]:
        return [rotation_about(self.axes[j], self.angles[j])
                for j in range(self.n_joints)]


@dataclass(frozen=True)
class BackboneShape:
    """Homogeneous frames along the backbone, base frame first.

    frames[i] is the proximal frame of section i for i < n_sections; the
    last frame is the tip end.  positions are the polyline vertices.
    """

    frames: np.ndarray

    @property
    def positions(self) -> np.ndarray:
        return self.frames[:, :3, 3]

    @property
    def tip(self) -> np.ndarray:
        return self.frames[-1, :3, 3]

    def transformed(self, world: np.ndarray) -> "BackboneShape":
        return BackboneShape(frames=np.einsum("ij,njk->nik", world, self.frames))

    def planarity_residual(self) -> float:
        """Max distance of any backbone vertex from the best-fit plane."""
        pts = self.positions
        centered = pts - pts.mean(axis=0)
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        normal = vt[-1]
        return float(np.max(np.abs(centered @ normal)))


# -- length distribution -----------------------------------------------------

def bend_portions(spec: ManipulatorSpec) -> np.ndarray:
    """Normalized share of a commanded shortening assigned to each joint.

    The torque taper M_{i+1} = k_p^mu * M_i combined with I ~ r^4 and the
    arc length ~ k_p gives joint-angle increments in ratio k_p^(mu - 3)
    base to tip; the chord-rate weight adds one factor of the rim radius.
    Portions sum to 1 and grow toward the tip, so the tip curls first.
    """
    n = spec.n_joints
    mu = spec.moment_exponent
    idx = np.arange(n)
    rims = np.array([spec.rim_radius(j) for j in range(n)])
    w = rims * spec.k_p ** ((mu - 3.0) * idx)
    return w / math.fsum(w)


def total_cable_budget(spec: ManipulatorSpec) -> float:
    """Largest usable single-cable shortening: sum of rest chords."""
    return math.fsum(spec.rest_gap(j) for j in range(spec.n_joints))


def _distribute(total: float, weights: np.ndarray, budgets: np.ndarray):
    """Clamped proportional distribution with exact conservation.

    Returns (consumed, remainder, saturated).  Joints whose proportional
    share exceeds their budget consume exactly the budget; the excess is
    redistributed over the remaining joints until nothing overflows.
    sum(consumed) equals min(total, sum(budgets)) exactly.
    """
    n = len(budgets)
    consumed = np.zeros(n)
    saturated = np.zeros(n, dtype=bool)
    total_budget = math.fsum(budgets)
    if total >= total_budget:
        return budgets.copy(), total - total_budget, np.ones(n, dtype=bool)

    active = np.ones(n, dtype=bool)
    remaining = total
    for _ in range(n + 1):
        if remaining <= 0 or not active.any():
            break
        w = weights * active
        shares = remaining * w / math.fsum(w[active])
        over = active & (shares >= budgets)
        if over.any():
            consumed[over] = budgets[over]
            saturated[over] = True
            active &= ~over
            remaining = max(total - math.fsum(consumed), 0.0)
        else:
            consumed[active] = shares[active]
            break

    # pin the float sum to the exact target by nudging one free joint:
    # first the bulk correction, then an ulp walk (fsum is an exactly
    # rounded, monotone function of the pivot, so the walk terminates)
    if active.any():
        pivot = int(np.flatnonzero(active)[np.argmax(consumed[active])])
        consumed[pivot] += total - math.fsum(consumed)
        for _ in range(256):
            s = math.fsum(consumed)
            if s == total:
                break
            consumed[pivot] = math.nextafter(
                consumed[pivot], math.inf if s < total else -math.inf)
    return consumed, 0.0, saturated


@dataclass(frozen=True)
class BendResult:
    """Outcome of distributing one cable's shortening over the joints."""

    cable: str
    portions: np.ndarray
    budgets: np.ndarray
    consumed: np.ndarray
    new_chords: np.ndarray
    angles: np.ndarray
    saturated: np.ndarray
    remainder: float

    def configuration(self, spec: ManipulatorSpec) -> JointConfiguration:
        axis = tilt_axis(spec.cable_angle(self.cable))
        axes = np.tile(axis, (len(self.angles), 1))
        return JointConfiguration(axes=axes, angles=self.angles.copy(),
                                  saturated=self.saturated.copy())


def distribute_bend(spec: ManipulatorSpec, cable: str, shorten_mm: float) -> BendResult:
    """Distribute a single-cable shortening into per-joint chords and angles.

    If the command exceeds the total budget the result reports the
    unconsumed remainder and every joint saturated; no exception.
    """
    spec.cable_angle(cable)
    if shorten_mm < 0:
        raise DomainError("cable shortening must be non-negative")
    n = spec.n_joints
    budgets = np.array([spec.rest_gap(j) for j in range(n)])
    portions = bend_portions(spec)
    consumed, remainder, saturated = _distribute(shorten_mm, portions, budgets)
    new_chords = budgets - consumed
    new_chords[saturated] = 0.0
    hole_r = np.array([spec.hole_radius(j) for j in range(n)])
    angles = spec.joint_limit - 2.0 * np.arcsin(
        np.clip(new_chords / (2.0 * hole_r), 0.0, 1.0))
    angles = np.where(consumed == 0.0, 0.0, angles)
    angles = np.where(saturated, spec.joint_limit, angles)
    return BendResult(cable=cable, portions=portions, budgets=budgets,
                      consumed=consumed, new_chords=new_chords,
                      angles=angles, saturated=saturated, remainder=remainder)


# -- forward transform chain --------------------------------------------------

def _forward_frames(spec: ManipulatorSpec, rotations) -> np.ndarray:
    lengths = spec.section_lengths()
    n_sections = len(lengths)
    frames = np.empty((n_sections + 1, 4, 4))
    frame = np.eye(4)
    frames[0] = frame
    for i in range(n_sections):
        step = np.eye(4)
        step[0, 3] = lengths[i]
        if i < len(rotations):
            step[:3, :3] = rotations[i]
        frame = frame @ step
        frames[i + 1] = frame
    return frames


def forward_shape(spec: ManipulatorSpec, configuration) -> BackboneShape:
    """Compose the backbone frames for a joint configuration.

    Accepts a JointConfiguration or a plain array of angles (interpreted
    as planar rotations about the local z axis, parallel for all joints).
    Each step translates along local x by the section length, then
    rotates by the joint at its distal end.
    """
    if isinstance(configuration, JointConfiguration):
        if configuration.n_joints != spec.n_joints:
            raise DomainError("configuration joint count does not match spec")
        rotations = configuration.rotations()
    else:
        angles = np.asarray(configuration, dtype=float)
        if angles.shape != (spec.n_joints,):
            raise DomainError(
                f"expected {spec.n_joints} joint angles, got {angles.shape}")
        z = np.array([0.0, 0.0, 1.0])
        rotations = [rotation_about(z, a) for a in angles]
    return BackboneShape(frames=_forward_frames(spec, rotations))


def forward_shape_from_rotations(spec: ManipulatorSpec, rotations) -> BackboneShape:
    """Backbone frames from explicit per-joint rotation matrices."""
    if len(rotations) != spec.n_joints:
        raise DomainError("need one rotation per joint")
    return BackboneShape(frames=_forward_frames(spec, rotations))


# -- twisting -----------------------------------------------------------------

def _solve_tilt(gap, rim, alpha1, x1_target, alpha2, x2_target,
                gamma0, beta0, limit):
    """Newton solve for the tilt (gamma, beta) matching two cable chords."""
    gamma, beta = gamma0, min(max(beta0, 1e-9), limit)
    scale = gap
    for _ in range(80):
        f1 = chord_of_tilt(gap, rim, alpha1, gamma, beta) - x1_target
        f2 = chord_of_tilt(gap, rim, alpha2, gamma, beta) - x2_target
        if max(abs(f1), abs(f2)) < 1e-13 * scale:
            return gamma, beta
        jac = np.empty((2, 2))
        for row, alpha in enumerate((alpha1, alpha2)):
            ka = math.cos(alpha - gamma)
            dka = math.sin(alpha - gamma)
            sb, cb = math.sin(beta), math.cos(beta)
            dx = rim * ka * sb - 0.5 * gap * (1.0 + cb)
            dc = rim * ka * (1.0 - cb) - 0.5 * gap * sb
            chord = math.hypot(dx, dc)
            ddx_dg = rim * dka * sb
            ddc_dg = rim * dka * (1.0 - cb)
            ddx_db = rim * ka * cb + 0.5 * gap * sb
            ddc_db = rim * ka * sb - 0.5 * gap * cb
            jac[row, 0] = (dx * ddx_dg + dc * ddc_dg) / chord
            jac[row, 1] = (dx * ddx_db + dc * ddc_db) / chord
        try:
            dg, db = np.linalg.solve(jac, [-f1, -f2])
        except np.linalg.LinAlgError:
            raise SolverError("singular Jacobian in twist chord solve",
                              residuals=(f1, f2)) from None
        step = 1.0
        if abs(db) > 0.5 * limit:  # damp wild steps
            step = 0.5 * limit / abs(db)
        gamma += step * dg
        beta = min(max(beta + step * db, 1e-12), limit)
    raise SolverError("twist chord solve did not converge",
                      residuals=(f1, f2))


def _gamma_at_limit(gap, rim, alpha1, x1_target, toward_sign):
    """Bend direction at the face-contact tilt that keeps cable 1's chord.

    Of the two symmetric solutions around alpha1, picks the branch on the
    second cable's side (toward_sign = sign of sin(alpha2 - alpha1)).
    """
    limit = 2.0 * math.atan2(gap, 2.0 * rim)

    def f(delta):
        return chord_of_tilt(gap, rim, alpha1, alpha1 + toward_sign * delta,
                             limit) - x1_target

    lo, hi = 0.0, math.pi
    flo, fhi = f(lo), f(hi)
    if flo > 0:
        # chord already above target at delta = 0 (fully bent joint)
        return alpha1
    if fhi < 0:
        raise SolverError("no bend direction keeps the first cable's chord",
                          bracket=(lo, hi), residuals=(flo, fhi))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return alpha1 + toward_sign * 0.5 * (lo + hi)


@dataclass(frozen=True)
class TwistResult:
    """Outcome of two-cable actuation.

    mode is "degenerate" (second cable slack: a plain bend), "symmetric"
    (equal commands: a planar bend along the pair's bisector) or
    "sequential" (a genuine twist).  budgets2/consumed2 hold the second
    stage's per-joint from-rest chord budgets and shortenings.
    """

    configuration: JointConfiguration
    mode: str
    stage1: BendResult | None
    budgets2: np.ndarray
    consumed2: np.ndarray
    remainder2: float
    free_up_to: int  # last joint index still free after stage 1; -1 if none


def _bisector(alpha1: float, alpha2: float) -> float:
    delta = math.remainder(alpha2 - alpha1, 2 * math.pi)
    return alpha1 + 0.5 * delta


def _symmetric_pair_bend(spec: ManipulatorSpec, cable1: str, cable2: str,
                         shorten_mm: float) -> TwistResult:
    """Equal activation of two cables: planar bend toward their bisector.

    Both chords close identically, so each joint tilts toward the
    bisector direction; the budget per joint is the chord travel between
    rest and the face-contact tilt along that direction.
    """
    alpha1 = spec.cable_angle(cable1)
    alpha2 = spec.cable_angle(cable2)
    gamma = _bisector(alpha1, alpha2)
    n = spec.n_joints
    gaps = np.array([spec.rest_gap(j) for j in range(n)])
    rims = np.array([spec.rim_radius(j) for j in range(n)])
    limit = spec.joint_limit

    chords_at_limit = np.array([
        chord_of_tilt(gaps[j], rims[j], alpha1, gamma, limit)
        for j in range(n)])
    budgets = gaps - chords_at_limit
    portions = bend_portions(spec)
    consumed, remainder, saturated = _distribute(shorten_mm, portions, budgets)

    angles = np.zeros(n)
    for j in range(n):
        if saturated[j]:
            angles[j] = limit
        elif consumed[j] > 0.0:
            target = gaps[j] - consumed[j]
            angles[j] = brentq(
                lambda b: chord_of_tilt(gaps[j], rims[j], alpha1, gamma, b)
                - target,
                0.0, limit, xtol=1e-15, rtol=8.9e-16)
    axes = np.tile(tilt_axis(gamma), (n, 1))
    config = JointConfiguration(axes=axes, angles=angles, saturated=saturated)
    return TwistResult(configuration=config, mode="symmetric", stage1=None,
                       budgets2=budgets, consumed2=consumed,
                       remainder2=remainder, free_up_to=_last_free(saturated))


def apply_twist(spec: ManipulatorSpec, primary: tuple[str, float],
                secondary: tuple[str, float]) -> TwistResult:
    """Two-cable actuation; both shortenings are measured from rest.

    A zero second command leaves that cable slack: the result is exactly
    the single-cable bend.  Equal commands are symmetric activation and
    bend in the pair's bisector plane.  Otherwise stage 1 bends with the
    first cable, then each joint still free of the face-contact limit is
    re-tilted so the first cable's chord is preserved exactly while the
    second cable's chord shortens to its distributed from-rest target,
    clamped at the face-contact tilt with overflow redistributed.
    """
    cable1, d1 = primary
    cable2, d2 = secondary
    if cable1 == cable2:
        raise DomainError("twist requires two distinct cables")
    if d1 < 0 or d2 < 0:
        raise DomainError("cable shortenings must be non-negative")
    alpha1 = spec.cable_angle(cable1)
    alpha2 = spec.cable_angle(cable2)
    n = spec.n_joints

    if d2 == 0.0:
        stage1 = distribute_bend(spec, cable1, d1)
        return TwistResult(configuration=stage1.configuration(spec),
                           mode="degenerate", stage1=stage1,
                           budgets2=np.zeros(n), consumed2=np.zeros(n),
                           remainder2=0.0,
                           free_up_to=_last_free(stage1.saturated))

    if d2 == d1:
        return _symmetric_pair_bend(spec, cable1, cable2, d1)

    stage1 = distribute_bend(spec, cable1, d1)
    config1 = stage1.configuration(spec)
    free_up_to = _last_free(stage1.saturated)
    if free_up_to < 0:
        return TwistResult(configuration=config1, mode="sequential",
                           stage1=stage1, budgets2=np.zeros(n),
                           consumed2=np.zeros(n), remainder2=d2,
                           free_up_to=free_up_to)

    gaps = stage1.budgets
    rims = np.array([spec.rim_radius(j) for j in range(n)])
    limit = spec.joint_limit
    toward = 1.0 if math.sin(alpha2 - alpha1) >= 0 else -1.0

    # from-rest budget: the second chord can travel from the rest gap down
    # to its value at the face-contact tilt on the cable-1-preserving branch
    active = ~stage1.saturated
    gammas_limit = np.zeros(n)
    budgets2 = np.zeros(n)
    for j in np.flatnonzero(active):
        gammas_limit[j] = _gamma_at_limit(gaps[j], rims[j], alpha1,
                                          stage1.new_chords[j], toward)
        at_limit = chord_of_tilt(gaps[j], rims[j], alpha2,
                                 gammas_limit[j], limit)
        budgets2[j] = max(gaps[j] - at_limit, 0.0)

    portions = stage1.portions * active
    portions = portions / math.fsum(portions[active])
    consumed2 = np.zeros(n)
    cons_active, remainder2, sat2_active = _distribute(
        d2, portions[active], budgets2[active])
    consumed2[active] = cons_active
    sat2 = np.zeros(n, dtype=bool)
    sat2[active] = sat2_active

    axes = config1.axes.copy()
    angles = config1.angles.copy()
    saturated = stage1.saturated.copy()
    for j in np.flatnonzero(active):
        if consumed2[j] == 0.0:
            continue
        if sat2[j]:
            gamma, beta = gammas_limit[j], limit
        else:
            gamma, beta = _solve_tilt(
                gaps[j], rims[j],
                alpha1, stage1.new_chords[j],
                alpha2, gaps[j] - consumed2[j],
                gamma0=_init_gamma(gaps[j], rims[j], alpha1, alpha2,
                                   stage1.consumed[j], consumed2[j]),
                beta0=max(stage1.angles[j], 1e-6), limit=limit)
        axes[j] = tilt_axis(gamma)
        angles[j] = beta
        saturated[j] = beta >= limit

    config = JointConfiguration(axes=axes, angles=angles, saturated=saturated)
    return TwistResult(configuration=config, mode="sequential", stage1=stage1,
                       budgets2=budgets2, consumed2=consumed2,
                       remainder2=remainder2, free_up_to=free_up_to)


def _last_free(saturated: np.ndarray) -> int:
    free = np.flatnonzero(~saturated)
    return int(free[-1]) if len(free) else -1


def _init_gamma(gap, rim, alpha1, alpha2, s1, s2):
    """Linearized initial bend direction from the two total shortenings."""
    u1 = np.array([math.cos(alpha1), math.sin(alpha1)])
    u2 = np.array([math.cos(alpha2), math.sin(alpha2)])
    rhs = np.array([max(s1, 1e-12), max(s2, 1e-12)]) / rim
    v = np.linalg.solve(np.stack([u1, u2]), rhs)
    return math.atan2(v[1], v[0])


# -- passive cables and rest composition --------------------------------------

def passive_cable_lengths(spec: ManipulatorSpec, configuration) -> dict[str, float]:
    """Total hole-to-hole chord length per cable for a joint configuration.

    Accepts a JointConfiguration or a list of per-joint rotation matrices.
    """
    if isinstance(configuration, JointConfiguration):
        rotations = configuration.rotations()
    else:
        rotations = list(configuration)
    if len(rotations) != spec.n_joints:
        raise DomainError("need one rotation per joint")
    out = {}
    for cable, alpha in spec.cable_layout.items():
        h = cable_direction(alpha)
        total = 0.0
        for j, rot in enumerate(rotations):
            gap = spec.rest_gap(j)
            rim = spec.rim_radius(j)
            b = np.array([-gap / 2, 0.0, 0.0]) + rim * h
            c = rot @ (np.array([gap / 2, 0.0, 0.0]) + rim * h)
            total += float(np.linalg.norm(b - c))
        out[cable] = total
    return out


GRAVITY_SAG_AXIS = np.array([0.0, 1.0, 0.0])  # bends x toward -z


def command_configuration(spec: ManipulatorSpec,
                          command: ActuationCommand) -> JointConfiguration:
    """Joint configuration produced by a cable command on the straight arm."""
    if command.cable2 is not None and command.shorten2_mm > 0:
        return apply_twist(spec, (command.cable, command.shorten_mm),
                           (command.cable2, command.shorten2_mm)).configuration
    return distribute_bend(spec, command.cable,
                           command.shorten_mm).configuration(spec)


def actuate_from_rest(spec: ManipulatorSpec, rest, command: ActuationCommand) -> BackboneShape:
    """Compose the gravity rest pose with a cable command, per joint.

    Each joint applies its rest rotation (in the vertical plane) first,
    then the actuation rotation, both in the joint's local frame.  The
    returned shape is in the base frame; tilt the base to place it in a
    gravity-aligned world frame.
    """
    config = command_configuration(spec, command)
    rest_angles = np.asarray(rest.joint_angles, dtype=float)
    if rest_angles.shape != (spec.n_joints,):
        raise DomainError("rest state joint count does not match spec")
    act_rots = config.rotations()
    rots = [rotation_about(GRAVITY_SAG_AXIS, rest_angles[j]) @ act_rots[j]
            for j in range(spec.n_joints)]
    return forward_shape_from_rotations(spec, rots)
