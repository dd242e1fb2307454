"""Risk shadows of obstacles with Gaussian position uncertainty.

A full shadow at risk ``eps`` is the posed nominal body plus the covariance
ellipsoid at level ``chi2_isf(eps, 3)``; it contains the displaced obstacle
with probability exactly ``1 - eps``. A half shadow keeps only the part of
that ellipsoid with ``normal . d >= 0`` and so captures ``(1 - eps) / 2``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .chi2 import chi2_isf
from .geometry import (
    ConvexBody,
    GeometryError,
    Pose,
    Posed,
    as_vec3,
    check_covariance,
    covariance_ellipsoid,
    half_ellipsoid,
    minkowski_sum,
)

DOF = 3
EPS_FLOOR = 1e-9


def eps_min(eps_tol: float) -> float:
    """Smallest risk level a shadow is ever built at.

    Bisection midpoints always exceed ``eps_tol / 2``, so with this floor the
    clamp never replaces a midpoint by a larger (smaller-shadow) level.
    """
    return min(0.5 * eps_tol, EPS_FLOOR)


@dataclass(frozen=True, eq=False)
class UncertainObstacle:
    """Convex obstacle whose world position is displaced by ``d ~ N(0, sigma_world)``.

    ``sigma_local`` is expressed in the obstacle frame given by ``pose``.
    """

    nominal: ConvexBody
    pose: Pose = field(default_factory=Pose)
    sigma_local: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def __post_init__(self):
        object.__setattr__(self, "sigma_local", check_covariance(self.sigma_local))

    @property
    def body(self) -> ConvexBody:
        """Nominal geometry placed in the world."""
        return Posed(self.nominal, self.pose)

    @property
    def sigma_world(self) -> np.ndarray:
        return sigma_world(self)


def sigma_world(obstacle: UncertainObstacle) -> np.ndarray:
    """World-frame covariance.

    With ``R`` the world-to-local rotation (the transpose of the pose
    rotation), ``sigma_local = R sigma_world R^T``; this inverts that map.
    """
    r_wl = obstacle.pose.rotation.T
    s = r_wl.T @ obstacle.sigma_local @ r_wl
    return 0.5 * (s + s.T)


def sigma_local_from_world(pose: Pose, sigma_w) -> np.ndarray:
    r_wl = pose.rotation.T
    s = r_wl @ check_covariance(sigma_w) @ r_wl.T
    return 0.5 * (s + s.T)


class ShadowKind(enum.Enum):
    FULL = "full"
    HALF = "half"


@dataclass(frozen=True, eq=False)
class ShadowSpec:
    kind: ShadowKind
    epsilon: float
    normal: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise GeometryError(f"shadow risk must lie in (0, 1), got {self.epsilon}")
        if self.kind is ShadowKind.HALF:
            n = as_vec3(self.normal, "normal")
            if abs(np.linalg.norm(n) - 1.0) > 1e-9:
                raise GeometryError("half shadow normal must be a unit vector")
            object.__setattr__(self, "normal", n)

    @property
    def captured_mass(self) -> float:
        if self.kind is ShadowKind.FULL:
            return 1.0 - self.epsilon
        return 0.5 * (1.0 - self.epsilon)

    @property
    def level(self) -> float:
        return chi2_isf(self.epsilon, DOF)


def _check_eps(eps, floor):
    if not (math.isfinite(eps) and floor <= eps < 1.0):
        raise GeometryError(f"shadow risk must lie in [{floor}, 1), got {eps}")


def full_shadow(obstacle: UncertainObstacle, eps: float, floor: float = EPS_FLOOR) -> ConvexBody:
    _check_eps(eps, floor)
    ell = covariance_ellipsoid(obstacle.sigma_world, chi2_isf(eps, DOF))
    return minkowski_sum(obstacle.body, ell)


def half_shadow(obstacle: UncertainObstacle, eps: float, normal, floor: float = EPS_FLOOR) -> ConvexBody:
    _check_eps(eps, floor)
    ell = half_ellipsoid(obstacle.sigma_world, chi2_isf(eps, DOF), normal)
    return minkowski_sum(obstacle.body, ell)


def shadow(obstacle: UncertainObstacle, spec: ShadowSpec) -> ConvexBody:
    if spec.kind is ShadowKind.FULL:
        return full_shadow(obstacle, spec.epsilon, floor=0.0)
    return half_shadow(obstacle, spec.epsilon, spec.normal, floor=0.0)


def in_displacement_set(d: np.ndarray, sigma: np.ndarray, spec: ShadowSpec) -> np.ndarray:
    """Membership of displacements ``d`` (N, 3) in the shadow's displacement
    set, i.e. the event that the displaced obstacle lies inside the shadow."""
    d = np.atleast_2d(d)
    # solve via pseudo-inverse so flat covariances behave like their limit
    m = np.einsum("ij,jk,ik->i", d, np.linalg.pinv(sigma), d)
    inside = m <= spec.level
    if spec.kind is ShadowKind.HALF:
        inside &= d @ spec.normal >= 0.0
    return inside
