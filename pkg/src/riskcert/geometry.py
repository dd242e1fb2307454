"""Support-mapped convex bodies.

Every body answers ``support(u)``: a point of the body maximizing ``u . p``.
Minkowski sums and rigid placements are kept implicit; nothing here ever
enumerates the vertices of a sum.

Bodies are immutable. Each one can also be lowered to a flat list of posed
primitive *terms* (see :meth:`ConvexBody.terms`), which is what the compiled
kernels in :mod:`riskcert._kernels` consume. The Python ``support`` methods
below are the readable reference the kernels are tested against.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Sequence

import numpy as np

SYMMETRY_TOL = 1e-9
EIGEN_TOL = 1e-12
ORTHONORMAL_TOL = 1e-9
UNIT_TOL = 1e-9

# term kinds shared with the kernels
POLYTOPE, SPHERE, BOX, CYLINDER, ELLIPSOID, HALF_ELLIPSOID = range(6)


class GeometryError(ValueError):
    """Invalid geometric input (bad covariance, pose, direction, ...)."""


def as_vec3(v, name="vector") -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape != (3,):
        raise GeometryError(f"{name} must have shape (3,), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise GeometryError(f"{name} has non-finite entries")
    return a


def as_mat3(m, name="matrix") -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.shape != (3, 3):
        raise GeometryError(f"{name} must have shape (3, 3), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise GeometryError(f"{name} has non-finite entries")
    return a


def check_covariance(sigma, sym_tol=SYMMETRY_TOL, eig_tol=EIGEN_TOL) -> np.ndarray:
    """Validate a symmetric positive semi-definite 3x3 matrix and return it
    exactly symmetrized."""
    s = as_mat3(sigma, "covariance")
    if np.max(np.abs(s - s.T)) > sym_tol:
        raise GeometryError("covariance is not symmetric")
    s = 0.5 * (s + s.T)
    lam_min = np.linalg.eigvalsh(s)[0]
    if lam_min < -eig_tol:
        raise GeometryError(f"covariance is not positive semi-definite (eigenvalue {lam_min:.3g})")
    return s


def _check_direction(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (3,):
        raise GeometryError(f"direction must have shape (3,), got {u.shape}")
    if not np.all(np.isfinite(u)):
        raise GeometryError("direction has non-finite entries")
    if not np.any(u):
        raise GeometryError("support direction must be nonzero")
    return u


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform ``x -> rotation @ x + translation``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    tol: float = ORTHONORMAL_TOL

    def __post_init__(self):
        r = as_mat3(self.rotation, "rotation")
        t = as_vec3(self.translation, "translation")
        if np.max(np.abs(r.T @ r - np.eye(3))) > self.tol:
            raise GeometryError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > self.tol:
            raise GeometryError("rotation is not proper (det != +1)")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_translation(cls, t) -> "Pose":
        return cls(np.eye(3), np.asarray(t, dtype=float))

    def apply(self, p) -> np.ndarray:
        return self.rotation @ np.asarray(p, dtype=float) + self.translation

    def compose(self, inner: "Pose") -> "Pose":
        """``self`` after ``inner``."""
        return Pose(self.rotation @ inner.rotation, self.rotation @ inner.translation + self.translation)


def rotation_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


class Term(NamedTuple):
    """One posed primitive of a flattened body."""

    kind: int
    rotation: np.ndarray
    translation: np.ndarray
    params: np.ndarray
    vertices: np.ndarray  # (v, 3); empty unless kind == POLYTOPE


_NO_VERTS = np.zeros((0, 3))


class ConvexBody:
    """Base class. Subclasses implement ``support`` and ``_terms``."""

    def support(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _terms(self, rotation: np.ndarray, translation: np.ndarray) -> List[Term]:
        raise NotImplementedError

    def terms(self) -> List[Term]:
        """Flatten into posed primitives whose supports sum to this body's."""
        return self._terms(np.eye(3), np.zeros(3))


@dataclass(frozen=True, eq=False)
class Polytope(ConvexBody):
    """Convex hull of a vertex list. Ties go to the lowest vertex index."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.ndim != 2 or v.shape[1] != 3 or v.shape[0] < 1:
            raise GeometryError("polytope needs an (n >= 1, 3) vertex array")
        if not np.all(np.isfinite(v)):
            raise GeometryError("polytope has non-finite vertices")
        object.__setattr__(self, "vertices", v)

    def support(self, u):
        # argmax returns the first maximizer
        return self.vertices[int(np.argmax(self.vertices @ u))].copy()

    def _terms(self, rotation, translation):
        return [Term(POLYTOPE, rotation, translation, np.zeros(0), self.vertices)]


def point(p) -> Polytope:
    return Polytope(as_vec3(p, "point")[None, :])


@dataclass(frozen=True, eq=False)
class Sphere(ConvexBody):
    radius: float

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius >= 0.0):
            raise GeometryError(f"sphere radius must be finite and >= 0, got {self.radius}")

    def support(self, u):
        return self.radius * u / np.linalg.norm(u)

    def _terms(self, rotation, translation):
        return [Term(SPHERE, rotation, translation, np.array([self.radius]), _NO_VERTS)]


@dataclass(frozen=True, eq=False)
class Box(ConvexBody):
    """Axis-aligned box centred at the origin. Zero components of ``u``
    select the positive face."""

    half_extents: np.ndarray

    def __post_init__(self):
        h = as_vec3(self.half_extents, "half_extents")
        if np.any(h <= 0.0):
            raise GeometryError("box half extents must be > 0")
        object.__setattr__(self, "half_extents", h)

    def support(self, u):
        return np.where(u >= 0.0, self.half_extents, -self.half_extents)

    def _terms(self, rotation, translation):
        return [Term(BOX, rotation, translation, self.half_extents.copy(), _NO_VERTS)]


@dataclass(frozen=True, eq=False)
class Cylinder(ConvexBody):
    """Solid cylinder along the local z axis."""

    radius: float
    half_height: float

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius > 0.0):
            raise GeometryError("cylinder radius must be > 0")
        if not (math.isfinite(self.half_height) and self.half_height > 0.0):
            raise GeometryError("cylinder half_height must be > 0")

    def support(self, u):
        radial = math.hypot(u[0], u[1])
        z = self.half_height if u[2] >= 0.0 else -self.half_height
        if radial > 0.0:
            s = self.radius / radial
            return np.array([s * u[0], s * u[1], z])
        return np.array([0.0, 0.0, z])

    def _terms(self, rotation, translation):
        return [Term(CYLINDER, rotation, translation, np.array([self.radius, self.half_height]), _NO_VERTS)]


def _ellipsoid_support(sigma, level, u):
    su = sigma @ u
    w = float(u @ su)
    if level == 0.0 or w <= 0.0:
        return np.zeros(3)
    return math.sqrt(level / w) * su


@dataclass(frozen=True, eq=False)
class CovarianceEllipsoid(ConvexBody):
    """``{d : d^T sigma^-1 d <= level}``, evaluated through ``sigma`` only so a
    singular covariance simply flattens the ellipsoid."""

    sigma: np.ndarray
    level: float

    def support(self, u):
        return _ellipsoid_support(self.sigma, self.level, u)

    def _terms(self, rotation, translation):
        params = np.concatenate([self.sigma.ravel(), [self.level]])
        return [Term(ELLIPSOID, rotation, translation, params, _NO_VERTS)]


@dataclass(frozen=True, eq=False)
class HalfEllipsoid(ConvexBody):
    """Covariance ellipsoid cut by the half-space ``normal . d >= 0``."""

    sigma: np.ndarray
    level: float
    normal: np.ndarray

    def support(self, u):
        p = _ellipsoid_support(self.sigma, self.level, u)
        n = self.normal
        if n @ p >= 0.0:
            return p
        # best point on the flat face n . d = 0
        sn = self.sigma @ n
        w = u - n * ((sn @ u) / (n @ sn))
        return _ellipsoid_support(self.sigma, self.level, w)

    def _terms(self, rotation, translation):
        params = np.concatenate([self.sigma.ravel(), [self.level], self.normal])
        return [Term(HALF_ELLIPSOID, rotation, translation, params, _NO_VERTS)]


@dataclass(frozen=True, eq=False)
class Posed(ConvexBody):
    body: ConvexBody
    pose: Pose

    def support(self, u):
        r = self.pose.rotation
        return r @ self.body.support(r.T @ u) + self.pose.translation

    def _terms(self, rotation, translation):
        return self.body._terms(rotation @ self.pose.rotation, rotation @ self.pose.translation + translation)


@dataclass(frozen=True, eq=False)
class MinkowskiSum(ConvexBody):
    a: ConvexBody
    b: ConvexBody

    def support(self, u):
        return self.a.support(u) + self.b.support(u)

    def _terms(self, rotation, translation):
        # the enclosing translation is counted once
        return self.a._terms(rotation, translation) + self.b._terms(rotation, np.zeros(3))


def support(body: ConvexBody, direction) -> np.ndarray:
    """Farthest point of ``body`` along ``direction`` (need not be unit).

    Raises
    ------
    GeometryError
        For a zero or non-finite direction.
    """
    return body.support(_check_direction(direction))


def covariance_ellipsoid(sigma, level: float, sym_tol=SYMMETRY_TOL, eig_tol=EIGEN_TOL) -> CovarianceEllipsoid:
    if not (math.isfinite(level) and level >= 0.0):
        raise GeometryError(f"ellipsoid level must be finite and >= 0, got {level}")
    return CovarianceEllipsoid(check_covariance(sigma, sym_tol, eig_tol), float(level))


def half_ellipsoid(sigma, level: float, normal, sym_tol=SYMMETRY_TOL, eig_tol=EIGEN_TOL, unit_tol=UNIT_TOL) -> HalfEllipsoid:
    if not (math.isfinite(level) and level >= 0.0):
        raise GeometryError(f"ellipsoid level must be finite and >= 0, got {level}")
    n = as_vec3(normal, "normal")
    if abs(np.linalg.norm(n) - 1.0) > unit_tol:
        raise GeometryError("half-space normal must be a unit vector")
    return HalfEllipsoid(check_covariance(sigma, sym_tol, eig_tol), float(level), n)


def minkowski_sum(a: ConvexBody, b: ConvexBody) -> MinkowskiSum:
    return MinkowskiSum(a, b)


def posed(body: ConvexBody, pose: Pose) -> Posed:
    return Posed(body, pose)


def minkowski_sum_all(bodies: Sequence[ConvexBody]) -> ConvexBody:
    out = bodies[0]
    for b in bodies[1:]:
        out = MinkowskiSum(out, b)
    return out
