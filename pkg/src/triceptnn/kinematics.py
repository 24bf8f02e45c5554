"""Closed-form kinematics of the Tricept 3-DoF parallel manipulator.

Pose is ``(theta, psi, c)``: rotation about global y, rotation about global
x, and the passive-leg extension.  The moving platform's spherical joints are

    A_i = R(theta, psi) @ (p_i + d * z) + c * z,     R = Ry(theta) @ Rx(psi)

with ``c * z`` added in the *global* frame, and the base universal joints
``B_i`` lie on an equilateral triangle of side ``b`` in the z = 0 plane.  The
actuator lengths are ``q_i = |A_i - B_i|``.

:func:`expanded_leg_lengths` evaluates the widely circulated expansions of ``q_i**2``
term by term; they disagree with the vector norm in the ``a*c`` terms (see
``docs/leg_length_algebra.md``) and are kept only for cross-checking.
"""
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    AlgebraMismatchError,
    ConvergenceError,
    InvalidArgumentError,
    SingularConfigurationError,
)
from .numerics import finite_difference_jacobian

SQRT3 = math.sqrt(3.0)
SINGULAR_LENGTH = 1e-9  # mm
SINGULAR_CONDITION = 1e12

# Leg-length extremes of the reference workspace (min, max per leg, mm).
REFERENCE_Q_MIN = (470.2868, 470.2886, 470.2886)
REFERENCE_Q_MAX = (664.9327, 664.9422, 664.9422)


def _finite(*values):
    return all(math.isfinite(v) for v in values)


@dataclass(frozen=True)
class TriceptGeometry:
    """Fixed dimensions in mm: platform triangle side ``a``, base triangle
    side ``b`` and tool offset ``d`` from the passive-leg joint to the
    platform origin."""

    a: float
    b: float
    d: float

    def __post_init__(self):
        if not _finite(self.a, self.b, self.d):
            raise InvalidArgumentError("geometry values must be finite")
        if self.a < 0 or self.b < 0 or self.d < 0:
            raise InvalidArgumentError("geometry values must be non-negative")
        if self.a == 0 and self.b == 0:
            raise InvalidArgumentError("a and b cannot both be zero")


@dataclass(frozen=True)
class Pose:
    theta: float
    psi: float
    c: float

    def __post_init__(self):
        if not _finite(self.theta, self.psi, self.c):
            raise InvalidArgumentError("pose values must be finite")
        if self.c <= 0:
            raise InvalidArgumentError("passive extension c must be > 0")

    def as_array(self):
        return np.array([self.theta, self.psi, self.c])


@dataclass(frozen=True)
class PoseDomain:
    theta_range: tuple = (-0.5027, 0.5027)
    psi_range: tuple = (-0.5027, 0.5027)
    c_range: tuple = (426.0, 634.0)

    def __post_init__(self):
        for name in ("theta_range", "psi_range", "c_range"):
            lo, hi = getattr(self, name)
            if not _finite(lo, hi) or lo > hi:
                raise InvalidArgumentError(f"{name} must be a finite [min, max] pair")
            object.__setattr__(self, name, (float(lo), float(hi)))

    @property
    def bounds(self):
        """3x2 array of [min, max] rows in (theta, psi, c) order."""
        return np.array([self.theta_range, self.psi_range, self.c_range])

    @property
    def centroid(self):
        lo, hi = self.bounds.T
        return Pose(*(0.5 * (lo + hi)))

    def contains(self, pose):
        x = pose.as_array() if isinstance(pose, Pose) else np.asarray(pose, dtype=float)
        lo, hi = self.bounds.T
        return bool(np.all(x >= lo) and np.all(x <= hi))


@dataclass(frozen=True)
class LegLengths:
    q1: float
    q2: float
    q3: float

    def __post_init__(self):
        if not _finite(self.q1, self.q2, self.q3):
            raise InvalidArgumentError("leg lengths must be finite")
        if min(self.q1, self.q2, self.q3) <= 0:
            raise InvalidArgumentError("leg lengths must be > 0")

    def as_array(self):
        return np.array([self.q1, self.q2, self.q3])


@dataclass(frozen=True, eq=False)
class LegVectors:
    """Per-leg vectors of the closure loop; arrays are 3x3 with one column per leg."""

    platform_joints: np.ndarray
    base_joints: np.ndarray
    leg_directions: np.ndarray
    leg_lengths: np.ndarray


DEFAULT_DOMAIN = PoseDomain()
# Arbitrary round-number machine; angles matter a lot here.
PLACEHOLDER_GEOMETRY = TriceptGeometry(a=500.0, b=760.0, d=30.0)
# Output of calibrate_geometry() against REFERENCE_Q_MIN/MAX on the default
# 17x17x17 grid, rounded; reproduces every extreme to within 0.03 mm.
DEFAULT_GEOMETRY = TriceptGeometry(a=0.40379, b=345.41928, d=0.25837)


def _unit_triangle(side):
    return np.array(
        [
            [side / SQRT3, 0.0, 0.0],
            [-side / (2 * SQRT3), side / 2, 0.0],
            [-side / (2 * SQRT3), -side / 2, 0.0],
        ]
    )


def rotation_matrix(theta, psi):
    """``Ry(theta) @ Rx(psi)`` written out entrywise."""
    if not _finite(theta, psi):
        raise InvalidArgumentError("angles must be finite")
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    return np.array(
        [
            [ct, sp * st, cp * st],
            [0.0, cp, -sp],
            [-st, ct * sp, ct * cp],
        ]
    )


def base_joints(geom):
    """Universal-joint positions, one column per leg."""
    return _unit_triangle(geom.b).T


def platform_joints(geom, pose):
    """Spherical-joint positions in the global frame, one column per leg."""
    R = rotation_matrix(pose.theta, pose.psi)
    local = _unit_triangle(geom.a)
    local[:, 2] = geom.d
    return R @ local.T + np.array([[0.0], [0.0], [pose.c]])


def _joint_differences(geom, poses):
    # Vectorised A_i - B_i for an (N, 3) pose array; returns (N, 3 legs, 3 xyz).
    theta, psi, c = poses[:, 0], poses[:, 1], poses[:, 2]
    ct, st, cp, sp = np.cos(theta), np.sin(theta), np.cos(psi), np.sin(psi)
    P = _unit_triangle(geom.a)
    P[:, 2] = geom.d
    B = _unit_triangle(geom.b)
    out = np.empty((poses.shape[0], 3, 3))
    for i in range(3):
        x, y, z = P[i]
        out[:, i, 0] = ct * x + sp * st * y + cp * st * z - B[i, 0]
        out[:, i, 1] = cp * y - sp * z - B[i, 1]
        out[:, i, 2] = -st * x + ct * sp * y + ct * cp * z + c - B[i, 2]
    return out


def inverse_kinematics_batch(geom, poses):
    """Leg lengths for an ``(N, 3)`` array of ``(theta, psi, c)`` rows."""
    poses = np.atleast_2d(np.asarray(poses, dtype=float))
    if poses.shape[1] != 3:
        raise InvalidArgumentError(f"poses must have 3 columns, got {poses.shape}")
    if not np.all(np.isfinite(poses)):
        raise InvalidArgumentError("poses must be finite")
    diff = _joint_differences(geom, poses)
    q = np.sqrt(diff[..., 0] ** 2 + diff[..., 1] ** 2 + diff[..., 2] ** 2)
    bad = np.argwhere(q < SINGULAR_LENGTH)
    if bad.size:
        row, leg = bad[0]
        raise SingularConfigurationError(
            f"leg {leg + 1} has zero length at pose {tuple(poses[row])}"
        )
    return q


def inverse_kinematics(geom, pose):
    q = inverse_kinematics_batch(geom, pose.as_array()[None, :])[0]
    return LegLengths(*q)


def leg_vectors(geom, pose):
    A = platform_joints(geom, pose)
    B = base_joints(geom)
    L = A - B
    lengths = np.linalg.norm(L, axis=0)
    if np.any(lengths < SINGULAR_LENGTH):
        raise SingularConfigurationError(f"zero-length leg at {pose}")
    return LegVectors(A, B, L / lengths, lengths)


def expanded_leg_lengths(geom, pose):
    """Evaluate the printed term-by-term expansions of q1^2, q2^2, q3^2.

    Only meant for comparison with :func:`inverse_kinematics`; the ``a*c``
    terms of these expansions are known to be wrong.
    """
    a, b, c, d = geom.a, geom.b, pose.c, geom.d
    ct, st = math.cos(pose.theta), math.sin(pose.theta)
    cp, sp = math.cos(pose.psi), math.sin(pose.psi)
    common = a * a / 3 + b * b / 3 + c * c + d * d + 2 * c * d * ct * cp
    squares = [
        common - 2.0 / 3.0 * a * b * ct - 2 * b * d / SQRT3 * cp * st,
        common
        - 0.5 * a * b * (ct / 3 - sp * st / SQRT3 + cp)
        + b * d * (cp * st / SQRT3 + sp)
        - a * c * (st / SQRT3 + ct * sp),
        common
        - 0.5 * a * b * (ct / 3 + sp * st / SQRT3 + cp)
        + b * d * (cp * st / SQRT3 - sp)
        - a * c * (st / SQRT3 - ct * sp),
    ]
    for leg, value in enumerate(squares, start=1):
        if value < 0:
            raise AlgebraMismatchError(
                f"printed expansion gives q{leg}^2 = {value:.6g} < 0", leg=leg
            )
    return LegLengths(*(math.sqrt(v) for v in squares))


def expansion_discrepancy(geom, pose):
    """Closed-form ``printed q_i^2 - |A_i - B_i|^2`` per leg.

    Derived symbolically; only the ``a*c`` terms differ.
    """
    a, c = geom.a, pose.c
    ct, st = math.cos(pose.theta), math.sin(pose.theta)
    sp = math.sin(pose.psi)
    return np.array(
        [
            2 * a * c * st / SQRT3,
            -2 * a * c * (st / SQRT3 + ct * sp),
            -2 * a * c * (st / SQRT3 - ct * sp),
        ]
    )


def closure_residual(geom, pose, lengths):
    """Per-leg residual of the dot-multiplied closure equation, in mm.

    For leg i with n_i the unit vector from B_i to A_i:
    ``r_i = (c z + R(a_i + d z)) . n_i - B_i . n_i - l_i``.  Zero means the
    supplied length closes the loop.
    """
    vec = leg_vectors(geom, pose)
    l = lengths.as_array() if isinstance(lengths, LegLengths) else np.asarray(lengths, float)
    reach = np.einsum("ij,ij->j", vec.platform_joints, vec.leg_directions)
    base = np.einsum("ij,ij->j", vec.base_joints, vec.leg_directions)
    return reach - base - l


def forward_kinematics(geom, lengths, guess=None, tol=1e-11, max_iter=50,
                       domain=DEFAULT_DOMAIN, h=1e-6):
    """Recover the pose whose leg lengths match ``lengths``.

    Damped Newton on ``q(pose) - lengths`` with a central-difference 3x3
    Jacobian; the step is halved while the residual norm fails to decrease.
    ``guess`` defaults to the centroid of ``domain``.
    """
    if not tol > 0:
        raise InvalidArgumentError("tol must be > 0")
    target = lengths.as_array() if isinstance(lengths, LegLengths) else np.asarray(lengths, float)
    x = (guess if guess is not None else domain.centroid).as_array()

    def residual(p):
        return inverse_kinematics_batch(geom, p[None, :])[0] - target

    r = residual(x)
    for _ in range(max_iter):
        if np.max(np.abs(r)) <= tol:
            break
        J = finite_difference_jacobian(residual, x, h)
        if not np.all(np.isfinite(J)) or np.linalg.cond(J) > SINGULAR_CONDITION:
            raise SingularConfigurationError(f"FK Jacobian is singular near pose {tuple(x)}")
        step = np.linalg.solve(J, -r)
        norm = np.linalg.norm(r)
        scale = 1.0
        for _ in range(60):
            trial = x + scale * step
            if trial[2] > 0:
                r_trial = residual(trial)
                if np.linalg.norm(r_trial) < norm:
                    break
            scale *= 0.5
        else:
            break
        x, r = trial, r_trial
    if np.max(np.abs(r)) > tol:
        raise ConvergenceError(
            f"forward kinematics did not converge (max residual {np.max(np.abs(r)):.3g} mm)",
            residual=r,
        )
    return Pose(*x)


def calibrate_geometry(q_min=REFERENCE_Q_MIN, q_max=REFERENCE_Q_MAX, domain=DEFAULT_DOMAIN,
                       initial=PLACEHOLDER_GEOMETRY, points_per_axis=17):
    """Fit ``(a, b, d)`` so the IK leg-length extremes over a grid on
    ``domain`` match ``q_min``/``q_max``."""
    from scipy.optimize import least_squares as scipy_least_squares

    axes = [np.linspace(lo, hi, points_per_axis) for lo, hi in domain.bounds]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    target = np.concatenate([q_min, q_max])

    def residual(v):
        q = np.linalg.norm(_joint_differences(TriceptGeometry(*v), grid), axis=2)
        return np.concatenate([q.min(axis=0), q.max(axis=0)]) - target

    fit = scipy_least_squares(
        residual,
        [initial.a, initial.b, initial.d],
        bounds=([0.0, 0.0, 0.0], [np.inf, np.inf, np.inf]),
        xtol=1e-12,
        ftol=1e-12,
    )
    return TriceptGeometry(*(float(v) for v in fit.x))
