"""Physical manipulator description derived from a discrete spiral profile.

Sections are rigid frustum links joined by short elastic joints.  Joint j
sits at the distal end of section j (0-based, base first).  The joint is
modeled as a hinge at its center E between two parallel link faces; the
face gap is sized so the faces collide exactly at the joint rotation
limit, which makes the cable-chord budget and the rotation budget close
simultaneously.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import DomainError
from .spiral import DiscreteProfile

DEFAULT_JOINT_LIMIT = math.pi / 6
DEFAULT_CABLE_LAYOUT = {
    "dorsal": math.pi / 2,
    "ventral_left": 7 * math.pi / 6,
    "ventral_right": 11 * math.pi / 6,
}
CABLES = tuple(DEFAULT_CABLE_LAYOUT)

# torque falloff ratio between adjacent joints under single-cable pull,
# expressed as the exponent on k_p (empirical)
DEFAULT_MOMENT_EXPONENT = -2.5


@dataclass(frozen=True)
class MaterialConstants:
    """Material and environment constants.

    youngs_modulus in MPa, density in g/cm^3, gravity in m/s^2.
    """

    youngs_modulus: float = 16.9
    density: float = 1.22  # TPU-95A
    gravity: float = 9.81

    def __post_init__(self):
        if self.youngs_modulus <= 0 or self.density <= 0:
            raise DomainError("youngs_modulus and density must be positive")


def frustum_volume(r_big: float, r_small: float, height: float) -> float:
    """Volume of a conical frustum, mm^3."""
    return math.pi * height / 3.0 * (r_big**2 + r_big * r_small + r_small**2)


def frustum_centroid_fraction(r_big: float, r_small: float) -> float:
    """Centroid position along the axis as a fraction from the large face."""
    num = r_big**2 + 2 * r_big * r_small + 3 * r_small**2
    den = 4 * (r_big**2 + r_big * r_small + r_small**2)
    return num / den


@dataclass(frozen=True)
class SectionSpec:
    """One tapered link plus the elastic joint at its distal end.

    link_radius is the proximal-face radius (mm); link_length the axial
    extent (mm); joint_radius/joint_length describe the elastic cylinder;
    hole_radius is the distance from the joint center to each cable hole
    (|BE| = |CE|); mass in grams; cg_fraction locates the section CG along
    its axis from the proximal face.
    """

    index: int  # 1 = base
    link_radius: float
    link_length: float
    joint_radius: float
    joint_length: float
    hole_radius: float
    mass: float
    cg_fraction: float


@dataclass(frozen=True)
class ManipulatorSpec:
    """Complete manipulator description; immutable once built."""

    sections: tuple[SectionSpec, ...]
    material: MaterialConstants
    k_p: float
    joint_limit: float = DEFAULT_JOINT_LIMIT
    cable_layout: dict = field(default_factory=lambda: dict(DEFAULT_CABLE_LAYOUT))
    moment_exponent: float = DEFAULT_MOMENT_EXPONENT

    def __post_init__(self):
        if len(self.sections) < 2:
            raise DomainError("need at least two sections (one joint)")
        if set(self.cable_layout) != set(CABLES):
            raise DomainError(f"cable_layout must define exactly {CABLES}")

    @property
    def n_joints(self) -> int:
        return len(self.sections) - 1

    def _check_joint(self, j: int):
        if not 0 <= j < self.n_joints:
            raise DomainError(f"joint index {j} outside 0..{self.n_joints - 1}")

    def cable_angle(self, cable: str) -> float:
        try:
            return self.cable_layout[cable]
        except KeyError:
            raise DomainError(
                f"unknown cable {cable!r}; expected one of {CABLES}"
            ) from None

    # -- per-joint geometry ------------------------------------------------

    def hole_radius(self, j: int) -> float:
        self._check_joint(j)
        return self.sections[j].hole_radius

    def rim_radius(self, j: int) -> float:
        """Face rim radius at joint j (where the cable holes sit)."""
        self._check_joint(j)
        return self.sections[j].hole_radius * math.cos(self.joint_limit / 2)

    def rest_gap(self, j: int) -> float:
        """Axial face gap of the straight joint; closes to zero at the limit."""
        self._check_joint(j)
        return 2 * self.sections[j].hole_radius * math.sin(self.joint_limit / 2)

    def section_lengths(self) -> np.ndarray:
        return np.array([s.link_length for s in self.sections])

    def masses(self) -> np.ndarray:
        return np.array([s.mass for s in self.sections])

    @property
    def arm_length(self) -> float:
        """Straight backbone length, base face to tip end (mm)."""
        return float(np.sum(self.section_lengths()))

    def truncate(self, n_joints: int) -> "ManipulatorSpec":
        """Shortened copy keeping the first n_joints joints."""
        if not 1 <= n_joints <= self.n_joints:
            raise DomainError(f"n_joints must be in 1..{self.n_joints}")
        return ManipulatorSpec(
            sections=self.sections[: n_joints + 1],
            material=self.material,
            k_p=self.k_p,
            joint_limit=self.joint_limit,
            cable_layout=dict(self.cable_layout),
            moment_exponent=self.moment_exponent,
        )

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "material": asdict(self.material),
            "k_p": self.k_p,
            "joint_limit": self.joint_limit,
            "cable_layout": dict(self.cable_layout),
            "moment_exponent": self.moment_exponent,
            "sections": [asdict(s) for s in self.sections],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ManipulatorSpec":
        return cls(
            sections=tuple(SectionSpec(**s) for s in d["sections"]),
            material=MaterialConstants(**d["material"]),
            k_p=d["k_p"],
            joint_limit=d["joint_limit"],
            cable_layout=dict(d["cable_layout"]),
            moment_exponent=d.get("moment_exponent", DEFAULT_MOMENT_EXPONENT),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ManipulatorSpec":
        return cls.from_dict(json.loads(text))


def build_spec(
    profile: DiscreteProfile,
    material: MaterialConstants | None = None,
    joint_fraction: float = 0.15,
    joint_limit: float = DEFAULT_JOINT_LIMIT,
    cable_layout: dict | None = None,
) -> ManipulatorSpec:
    """Assemble a ManipulatorSpec from a discrete spiral profile.

    joint_fraction sets the elastic joint length (and core radius) as a
    fraction of the section dimensions; masses come from solid frustum
    volume times density; the CG fraction is the analytic frustum
    centroid.  All per-section quantities scale exactly by k_p.
    """
    if profile.n_sections == 0:
        raise DomainError("profile has no sections")
    if not 0 < joint_fraction < 0.5:
        raise DomainError("joint_fraction must be in (0, 0.5)")
    material = material or MaterialConstants()
    params = profile.params
    kp = profile.k_p
    bounds = params.section_boundaries()
    from .spiral import spiral_point  # local import avoids cycle at module load

    axis_pts = spiral_point(params, bounds, scaled=True)
    radii = (1.0 - params.k) * params.a * np.exp(params.b * bounds)
    density_g_mm3 = material.density / 1000.0
    cos_half = math.cos(joint_limit / 2)

    sections = []
    for i in range(profile.n_sections):
        r_prox = float(radii[i])
        r_dist = float(radii[i + 1])
        length = float(np.linalg.norm(axis_pts[i + 1] - axis_pts[i]))
        rim = r_dist  # joint sits at the distal face
        sections.append(SectionSpec(
            index=i + 1,
            link_radius=r_prox,
            link_length=length,
            joint_radius=joint_fraction * rim,
            joint_length=joint_fraction * length,
            hole_radius=rim / cos_half,
            mass=frustum_volume(r_prox, r_dist, length) * density_g_mm3,
            cg_fraction=frustum_centroid_fraction(r_prox, r_dist),
        ))

    return ManipulatorSpec(
        sections=tuple(sections),
        material=material,
        k_p=kp,
        joint_limit=joint_limit,
        cable_layout=dict(cable_layout or DEFAULT_CABLE_LAYOUT),
    )


def bending_stiffness(spec: ManipulatorSpec, j: int) -> float:
    """Elastic bending stiffness E*I/L of joint j, in N*mm per radian."""
    spec._check_joint(j)
    s = spec.sections[j]
    second_moment = math.pi / 4 * s.joint_radius**4
    return spec.material.youngs_modulus * second_moment / s.joint_length


def rest_chord(spec: ManipulatorSpec, j: int, cable: str = "dorsal") -> float:
    """Hole-to-hole distance across joint j in the straight configuration.

    Equal for all three cables: the straight joint has parallel faces, so
    every chord is the axial face gap.
    """
    spec.cable_angle(cable)
    return spec.rest_gap(j)


@dataclass(frozen=True)
class JointGeometry:
    """Cable-hole and center positions for one joint, one cable.

    Joint-local coordinates: x along the backbone toward the tip, origin
    at the joint center E.  A/B are the proximal link's holes, C/D the
    distal link's (C, D follow the joint state), G the rim point defining
    the single-cable bending axis.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    e: np.ndarray
    g: np.ndarray


def joint_geometry(
    spec: ManipulatorSpec,
    j: int,
    cable: str = "dorsal",
    rotation: np.ndarray | None = None,
) -> JointGeometry:
    """Hole positions for joint j and the given cable.

    rotation, if given, is the 3x3 joint rotation applied to the distal
    side (identity = straight).
    """
    spec._check_joint(j)
    alpha = spec.cable_angle(cable)
    h = np.array([0.0, math.cos(alpha), math.sin(alpha)])
    gap = spec.rest_gap(j)
    rim = spec.rim_radius(j)
    sec = spec.sections[j]
    sec_next = spec.sections[j + 1]

    b_pt = np.array([-gap / 2, 0.0, 0.0]) + rim * h
    c_pt = np.array([+gap / 2, 0.0, 0.0]) + rim * h
    a_pt = np.array([-gap / 2 - sec.link_length, 0.0, 0.0]) + sec.link_radius * h
    d_local = (np.array([+gap / 2 + sec_next.link_length, 0.0, 0.0])
               + sec_next.link_radius * spec.k_p * h)
    if rotation is not None:
        rotation = np.asarray(rotation, dtype=float)
        c_pt = rotation @ c_pt
        d_local = rotation @ d_local

    axis1 = np.cross(np.array([1.0, 0.0, 0.0]), h)
    axis1 /= np.linalg.norm(axis1)
    g_pt = sec.hole_radius * axis1
    return JointGeometry(a=a_pt, b=b_pt, c=c_pt, d=d_local,
                         e=np.zeros(3), g=g_pt)
