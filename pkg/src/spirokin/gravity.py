"""Resting shape of the unactuated manipulator under gravity.

The base is tilted by theta_0 below horizontal and the arm sags in the
vertical plane.  Each free joint balances its elastic torque E*I/L *
theta against the gravity moment of everything distal to it; joints that
hit the rotation limit are clamped there (faces in contact act as one
rigid body) and the remaining system re-balances.  Tilts past vertical
flip the moment sign through the cosine of the accumulated inclination,
so angles are signed: positive sags toward the below-axis side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError, SolverError
from .manipulator import ManipulatorSpec, bending_stiffness
from .actuation import (BackboneShape, GRAVITY_SAG_AXIS, JointConfiguration,
                        forward_shape)


@dataclass(frozen=True)
class RestState:
    """Equilibrium joint angles at base tilt theta_0 (radians, signed)."""

    theta_0: float
    joint_angles: np.ndarray
    saturated_mask: np.ndarray

    @property
    def n_joints(self) -> int:
        return len(self.joint_angles)


def _inclinations(theta_0: float, angles: np.ndarray) -> np.ndarray:
    """Inclination below horizontal of each section's axis."""
    n_sections = len(angles) + 1
    phi = np.empty(n_sections)
    phi[0] = theta_0
    phi[1:] = theta_0 + np.cumsum(angles)
    return phi


def _gravity_moments(spec: ManipulatorSpec, theta_0: float,
                     angles: np.ndarray) -> np.ndarray:
    """Gravity moment about every joint of all sections distal to it, N*mm."""
    phi = _inclinations(theta_0, angles)
    lengths = spec.section_lengths()
    masses = spec.masses()
    weights = masses * spec.material.gravity / 1000.0  # grams -> newtons
    cgs = np.array([s.cg_fraction for s in spec.sections])
    x_steps = lengths * np.cos(phi)

    n = spec.n_joints
    moments = np.zeros(n)
    # walk joints tip to base, accumulating distal weight and moment
    distal_weight = 0.0
    distal_moment = 0.0
    for j in range(n - 1, -1, -1):
        s = j + 1  # section immediately distal to joint j
        # shift the already-accumulated moment out by section s's span
        distal_moment += distal_weight * x_steps[s]
        distal_moment += weights[s] * cgs[s] * x_steps[s]
        distal_weight += weights[s]
        moments[j] = distal_moment
    return moments


def gravity_moment(spec: ManipulatorSpec, state: RestState, joint: int) -> float:
    """Gravity moment about one joint for the given rest state, N*mm."""
    spec._check_joint(joint)
    return float(_gravity_moments(spec, state.theta_0,
                                  np.asarray(state.joint_angles, float))[joint])


def _potential_energy(spec: ManipulatorSpec, theta_0: float,
                      angles: np.ndarray, stiffness: np.ndarray) -> float:
    phi = _inclinations(theta_0, angles)
    lengths = spec.section_lengths()
    weights = spec.masses() * spec.material.gravity / 1000.0
    cgs = np.array([s.cg_fraction for s in spec.sections])
    z_steps = -lengths * np.sin(phi)
    z_prox = np.concatenate([[0.0], np.cumsum(z_steps[:-1])])
    z_cg = z_prox + cgs * z_steps
    elastic = 0.5 * float(np.sum(stiffness * angles**2))
    return elastic + float(np.sum(weights * z_cg))


def _kkt_residuals(spec, theta_0, angles, stiffness, limit):
    """Torque-balance residuals, zeroed at validly clamped joints."""
    g = _gravity_moments(spec, theta_0, angles)
    res = stiffness * angles - g
    clamped_hi = (angles >= limit - 1e-12) & (res < 0)
    clamped_lo = (angles <= -limit + 1e-12) & (res > 0)
    res = res.copy()
    res[clamped_hi | clamped_lo] = 0.0
    return res


def _projected_newton(spec, theta_0, angles, stiffness, limit,
                      tol, max_iter=200):
    """Active-set Newton on the clamped torque-balance system."""
    n = len(angles)
    for _ in range(max_iter):
        g = _gravity_moments(spec, theta_0, angles)
        f = stiffness * angles - g
        pinned = ((angles >= limit - 1e-12) & (f < 0)) \
            | ((angles <= -limit + 1e-12) & (f > 0))
        free = ~pinned
        if not free.any() or np.max(np.abs(f[free])) < tol:
            return angles
        idx = np.flatnonzero(free)
        # numerical Jacobian of the free subsystem
        jac = np.diag(stiffness[idx])
        h = 1e-7
        for col, k in enumerate(idx):
            bumped = angles.copy()
            bumped[k] += h
            gb = _gravity_moments(spec, theta_0, bumped)
            jac[:, col] -= (gb[idx] - g[idx]) / h
        try:
            step = np.linalg.solve(jac, -f[idx])
        except np.linalg.LinAlgError:
            return angles
        angles = angles.copy()
        angles[idx] = np.clip(angles[idx] + step, -limit, limit)
    return angles


def solve_rest_shape(spec: ManipulatorSpec, theta_0: float,
                     tol: float = 1e-10, max_iter: int = 400,
                     damping: float = 0.4) -> RestState:
    """Solve the gravity equilibrium at base tilt theta_0.

    A damped fixed point on theta_j = G_j(theta) / (E*I/L)_j finds the
    basin, then an active-set Newton polishes the clamped system: free
    joints satisfy the torque balance, clamped joints sit at the limit
    with the moment still pushing outward.  Falls back to potential-energy
    minimization if Newton stalls; raises SolverError (with the residual
    vector) only if everything fails.
    """
    n = spec.n_joints
    stiffness = np.array([bending_stiffness(spec, j) for j in range(n)])
    limit = spec.joint_limit

    angles = np.zeros(n)
    for _ in range(max_iter):
        target = np.clip(_gravity_moments(spec, theta_0, angles) / stiffness,
                         -limit, limit)
        step = target - angles
        angles = angles + damping * step
        if np.max(np.abs(step)) < 1e-12:
            break
    angles = np.clip(angles, -limit, limit)
    angles = _projected_newton(spec, theta_0, angles, stiffness, limit, tol)

    if np.max(np.abs(_kkt_residuals(spec, theta_0, angles, stiffness,
                                    limit))) > tol:
        res = minimize(
            lambda th: _potential_energy(spec, theta_0, th, stiffness),
            angles, method="L-BFGS-B",
            bounds=[(-limit, limit)] * n,
            options={"maxiter": 2000, "ftol": 1e-16},
        )
        angles = _projected_newton(spec, theta_0,
                                   np.clip(res.x, -limit, limit),
                                   stiffness, limit, tol)
        r = _kkt_residuals(spec, theta_0, angles, stiffness, limit)
        if np.max(np.abs(r)) > max(tol, 1e-8):
            raise SolverError(
                f"rest-shape solve did not converge at tilt {theta_0:.4f} rad",
                residuals=r.tolist(),
            )

    saturated = np.abs(angles) >= limit - 1e-12
    angles = angles.copy()
    angles[saturated] = np.sign(angles[saturated]) * limit
    return RestState(theta_0=theta_0, joint_angles=angles,
                     saturated_mask=saturated)


def rest_configuration(spec: ManipulatorSpec, rest: RestState) -> JointConfiguration:
    """Rest state as a joint configuration (sag axis, unsigned angles)."""
    angles = np.asarray(rest.joint_angles, float)
    signs = np.where(angles < 0, -1.0, 1.0)
    axes = signs[:, None] * GRAVITY_SAG_AXIS[None, :]
    return JointConfiguration(axes=axes, angles=np.abs(angles),
                              saturated=np.asarray(rest.saturated_mask, bool))


def rest_shape(spec: ManipulatorSpec, rest: RestState) -> BackboneShape:
    """Backbone shape of the rest state, in the base frame."""
    return forward_shape(spec, rest_configuration(spec, rest))


def tilt_transform(theta_0: float) -> np.ndarray:
    """World pose of the base at tilt theta_0: x tips below horizontal, z up."""
    c, s = math.cos(theta_0), math.sin(theta_0)
    return np.array([
        [c, 0.0, s, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [-s, 0.0, c, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
