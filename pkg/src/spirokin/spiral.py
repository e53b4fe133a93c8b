"""Logarithmic-spiral geometry and the design-parameter solve.

The manipulator profile is the area enclosed between an outer spiral
r = a*exp(b*theta) and the same spiral scaled toward the origin by a
factor k.  The scaled contour is the central axis of revolution, so the
local body radius at polar angle theta is (1 - k)*a*exp(b*theta).

Three constraints pin the free parameters:

  * compactness  - successive turns of the curled body touch exactly,
                   which forces k = 1/2 + 1/2*exp(-2*pi*b);
  * range overlap - the tip gripper's maximum grasp (m times its base
                    width) meets the body's minimum graspable size;
  * arm match    - a scales the whole profile so the base section radius
                   equals the rigid arm's end-link radius.

The two nonlinear conditions reduce to a single monotone equation in b,
solved by bracketed root finding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, SolverError

TRUNK_THETA_START = math.pi / 2
TRUNK_THETA_END = 7 * math.pi / 2
TRUNK_DELTA_THETA = math.pi / 6

GRIPPER_GROWTH_RATE = 0.618  # golden-ratio finger spiral
GRIPPER_DELTA_THETA = math.pi / 3


@dataclass(frozen=True)
class SpiralParams:
    """Parameters of one discretized spiral profile.

    a is the physical scale (mm per spiral unit), b the growth rate, k the
    contour scaling factor, and [theta_start, theta_end] the polar-angle
    span cut into sections of width delta_theta.
    """

    a: float
    b: float
    k: float
    delta_theta: float = TRUNK_DELTA_THETA
    theta_start: float = TRUNK_THETA_START
    theta_end: float = TRUNK_THETA_END

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0 or self.delta_theta <= 0:
            raise DomainError("a, b and delta_theta must be positive")
        if not 0 < self.k < 1:
            raise DomainError(f"k must lie in (0, 1), got {self.k}")
        span = self.theta_end - self.theta_start
        if span <= 0:
            raise DomainError("theta_end must exceed theta_start")
        ratio = span / self.delta_theta
        if abs(ratio - round(ratio)) > 1e-9:
            raise DomainError(
                "theta span must be an integer multiple of delta_theta "
                f"(span/delta_theta = {ratio})"
            )

    @property
    def n_sections(self) -> int:
        return round((self.theta_end - self.theta_start) / self.delta_theta)

    @property
    def k_p(self) -> float:
        """Similarity ratio between adjacent sections, exp(-b*delta_theta)."""
        return math.exp(-self.b * self.delta_theta)

    def section_boundaries(self) -> np.ndarray:
        """Polar angles of section boundaries, base (theta_end) to tip."""
        return self.theta_end - self.delta_theta * np.arange(self.n_sections + 1)

    @classmethod
    def gripper(cls, a: float = 1.0) -> "SpiralParams":
        """Finger profile: golden-ratio growth, 60-degree discretization."""
        b = GRIPPER_GROWTH_RATE
        k = 0.5 + 0.5 * math.exp(-2.0 * b * math.pi)
        return cls(a=a, b=b, k=k,
                   delta_theta=GRIPPER_DELTA_THETA,
                   theta_start=TRUNK_THETA_START,
                   theta_end=TRUNK_THETA_START + 2 * math.pi)


@dataclass(frozen=True)
class DesignConstraints:
    """Inputs to the design solve.

    m is the gripper-to-base graspable size ratio; r_rigid the end-link
    radius of the carrying arm in mm.  r_soft (the base radius of the
    unit-scale profile) is normally derived from the solved spiral and
    only needs to be supplied when matching an existing profile.
    """

    m: float
    r_rigid: float
    r_soft: float | None = None

    def __post_init__(self):
        if self.m <= 1:
            raise DomainError(f"size ratio m must exceed 1, got {self.m}")
        if self.r_rigid <= 0:
            raise DomainError("r_rigid must be positive")


def spiral_point(params: SpiralParams, theta, scaled: bool = False) -> np.ndarray:
    """Cartesian point(s) on the spiral contour, in mm.

    The outer contour is (-a*e^{b*theta}*cos(theta), a*e^{b*theta}*sin(theta));
    the scaled contour multiplies the radius by k along the same ray.
    Accepts a scalar or array theta inside [theta_start, theta_end].
    """
    th = np.asarray(theta, dtype=float)
    lo, hi = params.theta_start, params.theta_end
    if np.any(th < lo - 1e-12) or np.any(th > hi + 1e-12):
        raise DomainError(
            f"theta outside [{lo:.6f}, {hi:.6f}]"
        )
    r = params.a * np.exp(params.b * th)
    if scaled:
        r = params.k * r
    pts = np.stack([-r * np.cos(th), r * np.sin(th)], axis=-1)
    return pts


def _range_equation(b: float, m: float) -> float:
    # with k substituted from the compactness identity the overlap
    # condition reduces to e^{-pi b}/(1 - e^{-pi b}) = m
    u = math.exp(-math.pi * b)
    return u / (1.0 - u) - m


def solve_design_parameters(
    constraints: DesignConstraints,
    delta_theta: float = TRUNK_DELTA_THETA,
    theta_start: float = TRUNK_THETA_START,
    theta_end: float = TRUNK_THETA_END,
) -> SpiralParams:
    """Solve (a, b, k) from the size ratio m and the arm-match radius.

    b is found by bracketed root finding on the reduced overlap equation
    (monotone decreasing in b), k follows from the compactness identity,
    and a scales the profile so the base-section radius equals r_rigid.
    """
    m = constraints.m
    lo, hi = 1e-4, 2.0
    flo, fhi = _range_equation(lo, m), _range_equation(hi, m)
    if flo * fhi > 0:
        raise SolverError(
            f"no root of the range equation in b bracket [{lo}, {hi}]",
            bracket=(lo, hi), residuals=(flo, fhi),
        )
    b = brentq(_range_equation, lo, hi, args=(m,), xtol=1e-15, rtol=8.9e-16)
    k = 0.5 + 0.5 * math.exp(-2.0 * b * math.pi)

    # residuals of the full two-equation system, not the reduced form
    r1 = k - 0.5 - 0.5 * math.exp(-2.0 * b * math.pi)
    r2 = (math.exp(-2 * math.pi * b) + math.exp(-math.pi * b)) / (2 * (1 - k)) - m
    if max(abs(r1), abs(r2)) > 1e-10:
        raise SolverError(
            "design system residual exceeds 1e-10 after solve",
            bracket=(lo, hi), residuals=(r1, r2),
        )

    r_soft = constraints.r_soft
    if r_soft is None:
        # base-section radius of the unit-scale profile
        r_soft = (1.0 - k) * math.exp(b * theta_end)
    a = constraints.r_rigid / r_soft
    return SpiralParams(a=a, b=b, k=k, delta_theta=delta_theta,
                        theta_start=theta_start, theta_end=theta_end)


def compactness_residual(params: SpiralParams, n_grid: int = 1000) -> float:
    """Max deviation of the scaled contour from the turn midline, in mm.

    On a uniform theta grid, compares y_k = k*a*e^{b*theta}*sin(theta)
    against the mean of the inner-loop and outer-loop heights.  Zero iff
    k satisfies the compactness identity.
    """
    th = np.linspace(params.theta_start, params.theta_end, n_grid)
    a, b, k = params.a, params.b, params.k
    y_inside = a * np.exp(b * (th - 2 * np.pi)) * np.sin(th - 2 * np.pi)
    y_outside = a * np.exp(b * th) * np.sin(th)
    y_k = k * a * np.exp(b * th) * np.sin(th)
    return float(np.max(np.abs(y_k - 0.5 * (y_inside + y_outside))))


@dataclass(frozen=True)
class GraspRange:
    """Graspable-size summary in mm.

    hj is the body's minimum graspable width (across the innermost turn),
    gh the gripper base width (gap to the next turn out), gripper_max the
    gripper's largest grasp m*gh, body_max the opening of the outermost
    turn, and overlap = gripper_max - hj.
    """

    hj: float
    gh: float
    gripper_max: float
    body_max: float
    overlap: float


def grasp_range(params: SpiralParams, m: float) -> GraspRange:
    """Chord-based graspable ranges evaluated at the tip end of the spiral."""
    t0 = params.theta_start
    p0 = spiral_point(params, t0)
    # the chord endpoints sit one half-turn and one full turn further out,
    # which may exceed theta_end on short profiles; evaluate directly
    a, b = params.a, params.b

    def pt(th):
        r = a * math.exp(b * th)
        return np.array([-r * math.cos(th), r * math.sin(th)])

    hj = float(np.linalg.norm(p0 - pt(t0 + math.pi)))
    gh = float(np.linalg.norm(p0 - pt(t0 + 2 * math.pi)))
    te = params.theta_end
    body_max = float(np.linalg.norm(pt(te) - pt(te - math.pi)))
    gripper_max = m * gh
    return GraspRange(hj=hj, gh=gh, gripper_max=gripper_max,
                      body_max=body_max, overlap=gripper_max - hj)


@dataclass(frozen=True)
class DiscreteProfile:
    """Quadrilateral cross-sections cut from the spiral profile.

    cross_sections has shape (n_sections, 4, 2): vertices (A, B, C, D) =
    (outer proximal, outer distal, scaled distal, scaled proximal), listed
    base first.  All sections are mutually similar with ratio k_p.
    """

    cross_sections: np.ndarray
    k_p: float
    params: SpiralParams = field(repr=False)

    @property
    def n_sections(self) -> int:
        return self.cross_sections.shape[0]


def discretize_profile(params: SpiralParams) -> DiscreteProfile:
    """Cut the enclosed area between the two contours into quadrilaterals."""
    bounds = params.section_boundaries()  # base -> tip, descending theta
    outer = spiral_point(params, bounds)
    inner = spiral_point(params, bounds, scaled=True)
    quads = np.empty((params.n_sections, 4, 2))
    for i in range(params.n_sections):
        hi, lo = i, i + 1  # proximal (larger theta) and distal boundaries
        quads[i, 0] = outer[hi]
        quads[i, 1] = outer[lo]
        quads[i, 2] = inner[lo]
        quads[i, 3] = inner[hi]
    return DiscreteProfile(cross_sections=quads, k_p=params.k_p, params=params)


def revolve_mesh(profile: DiscreteProfile, segments: int = 32):
    """Revolve the profile about its central-axis contour into a tube mesh.

    Returns (vertices, faces) with vertices (n, 3) in mm and faces (m, 3)
    0-based triangle indices.  One ring per section boundary, placed in
    the curled (design) pose with the spiral in the xy plane.
    """
    if segments < 3:
        raise DomainError("need at least 3 revolve segments")
    params = profile.params
    bounds = params.section_boundaries()
    axis_pts = spiral_point(params, bounds, scaled=True)
    radii = (1.0 - params.k) * params.a * np.exp(params.b * bounds)

    n_rings = len(bounds)
    verts = np.empty((n_rings * segments, 3))
    ts = 2 * np.pi * np.arange(segments) / segments
    for i in range(n_rings):
        # ring plane normal: local axis direction along the curled backbone
        if i == 0:
            d = axis_pts[1] - axis_pts[0]
        elif i == n_rings - 1:
            d = axis_pts[-1] - axis_pts[-2]
        else:
            d = axis_pts[i + 1] - axis_pts[i - 1]
        d3 = np.array([d[0], d[1], 0.0])
        d3 /= np.linalg.norm(d3)
        n_in = np.array([-d3[1], d3[0], 0.0])  # in-plane normal
        b_up = np.array([0.0, 0.0, 1.0])
        c = np.array([axis_pts[i, 0], axis_pts[i, 1], 0.0])
        ring = (c[None, :]
                + radii[i] * np.cos(ts)[:, None] * n_in[None, :]
                + radii[i] * np.sin(ts)[:, None] * b_up[None, :])
        verts[i * segments:(i + 1) * segments] = ring

    faces = []
    for i in range(n_rings - 1):
        base0, base1 = i * segments, (i + 1) * segments
        for s in range(segments):
            s2 = (s + 1) % segments
            faces.append((base0 + s, base1 + s, base1 + s2))
            faces.append((base0 + s, base1 + s2, base0 + s2))
    return verts, np.asarray(faces, dtype=int)
