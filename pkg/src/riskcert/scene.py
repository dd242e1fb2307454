"""Scene files, validation and scenario generators.

A scene is a JSON document::

    {
      "version": "riskcert-scene/1",
      "links": [{"name": "upper_arm", "shape": {...}, "pose": {...}}, ...],
      "obstacles": [{"name": "crate", "shape": {...}, "pose": {...},
                     "covariance": [[...], [...], [...]], "frame": "local"}, ...]
    }

Shapes: ``{"kind": "box", "half_extents": [x, y, z]}``,
``{"kind": "sphere", "radius": r}``,
``{"kind": "polytope", "vertices": [[x, y, z], ...]}``,
``{"kind": "cylinder", "radius": r, "half_height": h}`` (axis along local z).
A pose is ``{"rotation": 3x3 row-major, "translation": [x, y, z]}`` and
defaults to the identity. Covariances are in m^2 and, unless ``"frame":
"world"`` is given, expressed in the obstacle's local frame.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from .geometry import ORTHONORMAL_TOL, Box, ConvexBody, Cylinder, Polytope, Pose, Posed, Sphere, rotation_z
from .shadow import UncertainObstacle, sigma_local_from_world

VERSION = "riskcert-scene/1"
FIXTURES = Path(__file__).parent / "fixtures"

# rotations this close to orthonormal are projected onto SO(3) instead of rejected
ORTHONORMALIZE_TOL = 1e-6


class SceneError(ValueError):
    """Invalid scene input. ``code`` identifies the failure class."""

    SYNTAX = "SYNTAX_ERROR"
    SCHEMA = "INVALID_FIELD"
    VERSION = "UNSUPPORTED_VERSION"
    UNKNOWN_SHAPE = "UNKNOWN_SHAPE_KIND"
    BAD_SHAPE = "INVALID_SHAPE"
    NON_SYMMETRIC = "NON_SYMMETRIC_COVARIANCE"
    NON_PSD = "NON_PSD_COVARIANCE"
    NON_ORTHONORMAL = "NON_ORTHONORMAL_ROTATION"
    DUPLICATE = "DUPLICATE_NAME"

    def __init__(self, code: str, message: str, line: Optional[int] = None, column: Optional[int] = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{code}: {message}{where}")
        self.code = code
        self.line = line
        self.column = column


@dataclass(frozen=True, eq=False)
class Link:
    name: str
    shape: ConvexBody
    pose: Pose = field(default_factory=Pose)

    @property
    def body(self) -> ConvexBody:
        return Posed(self.shape, self.pose)


@dataclass(frozen=True, eq=False)
class SceneObstacle:
    name: str
    obstacle: UncertainObstacle


@dataclass(frozen=True, eq=False)
class Scene:
    links: Tuple[Link, ...] = ()
    obstacles: Tuple[SceneObstacle, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        _unique([l.name for l in self.links], "link")
        _unique([o.name for o in self.obstacles], "obstacle")

    def link_bodies(self) -> List[ConvexBody]:
        return [l.body for l in self.links]

    def obstacle(self, name: str) -> UncertainObstacle:
        for o in self.obstacles:
            if o.name == name:
                return o.obstacle
        raise KeyError(name)


def _unique(names, what):
    seen = set()
    for n in names:
        if n in seen:
            raise SceneError(SceneError.DUPLICATE, f"duplicate {what} name {n!r}")
        seen.add(n)


# ------------------------------------------------------------------ parsing


def _num(x, where) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise SceneError(SceneError.SCHEMA, f"{where}: expected a number, got {x!r}")
    x = float(x)
    if not math.isfinite(x):
        raise SceneError(SceneError.SCHEMA, f"{where}: non-finite number")
    return x


def _array(x, shape, where) -> np.ndarray:
    try:
        a = np.array(x, dtype=float)
    except (TypeError, ValueError):
        raise SceneError(SceneError.SCHEMA, f"{where}: expected a numeric array") from None
    if a.shape != shape and not (shape[0] is None and a.ndim == 2 and a.shape[1] == shape[1]):
        raise SceneError(SceneError.SCHEMA, f"{where}: expected shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise SceneError(SceneError.SCHEMA, f"{where}: non-finite entries")
    return a


def _field(d, key, where):
    if not isinstance(d, dict):
        raise SceneError(SceneError.SCHEMA, f"{where}: expected an object")
    if key not in d:
        raise SceneError(SceneError.SCHEMA, f"{where}: missing field {key!r}")
    return d[key]


def _shape(d, where) -> ConvexBody:
    kind = _field(d, "kind", where)
    try:
        if kind == "box":
            h = _array(_field(d, "half_extents", where), (3,), f"{where}.half_extents")
            if np.any(h <= 0):
                raise SceneError(SceneError.BAD_SHAPE, f"{where}: half extents must be > 0")
            return Box(h)
        if kind == "sphere":
            r = _num(_field(d, "radius", where), f"{where}.radius")
            if r < 0:
                raise SceneError(SceneError.BAD_SHAPE, f"{where}: radius must be >= 0")
            return Sphere(r)
        if kind == "polytope":
            v = _array(_field(d, "vertices", where), (None, 3), f"{where}.vertices")
            if len(v) < 1:
                raise SceneError(SceneError.BAD_SHAPE, f"{where}: polytope needs at least one vertex")
            return Polytope(v)
        if kind == "cylinder":
            r = _num(_field(d, "radius", where), f"{where}.radius")
            h = _num(_field(d, "half_height", where), f"{where}.half_height")
            if r <= 0 or h <= 0:
                raise SceneError(SceneError.BAD_SHAPE, f"{where}: cylinder radius and half_height must be > 0")
            return Cylinder(r, h)
    except SceneError:
        raise
    except ValueError as exc:
        raise SceneError(SceneError.BAD_SHAPE, f"{where}: {exc}") from None
    raise SceneError(SceneError.UNKNOWN_SHAPE, f"{where}: unknown shape kind {kind!r}")


def _pose(d, where) -> Pose:
    if d is None:
        return Pose()
    r = _array(d.get("rotation", np.eye(3).tolist()) if isinstance(d, dict) else None, (3, 3), f"{where}.rotation")
    t = _array(d.get("translation", [0.0, 0.0, 0.0]), (3,), f"{where}.translation")
    err = max(np.max(np.abs(r.T @ r - np.eye(3))), abs(np.linalg.det(r) - 1.0))
    if err > ORTHONORMALIZE_TOL:
        raise SceneError(SceneError.NON_ORTHONORMAL, f"{where}: rotation is not a proper orthonormal matrix")
    if err > ORTHONORMAL_TOL:
        u, _, vt = np.linalg.svd(r)
        r = u @ vt
    return Pose(r, t)


def _covariance(x, where) -> np.ndarray:
    s = _array(x, (3, 3), where)
    if np.max(np.abs(s - s.T)) > 1e-9:
        raise SceneError(SceneError.NON_SYMMETRIC, f"{where}: covariance is not symmetric")
    s = 0.5 * (s + s.T)
    lam = np.linalg.eigvalsh(s)[0]
    if lam < -1e-12:
        raise SceneError(SceneError.NON_PSD, f"{where}: covariance has negative eigenvalue {lam:.6g}")
    return s


def _name(d, where) -> str:
    n = _field(d, "name", where)
    if not isinstance(n, str) or not n:
        raise SceneError(SceneError.SCHEMA, f"{where}: name must be a non-empty string")
    return n


def scene_from_dict(doc) -> Scene:
    if not isinstance(doc, dict):
        raise SceneError(SceneError.SCHEMA, "top level must be an object")
    version = doc.get("version", VERSION)
    if version != VERSION:
        raise SceneError(SceneError.VERSION, f"unsupported version {version!r}, expected {VERSION!r}")
    links_doc = doc.get("links", [])
    obs_doc = doc.get("obstacles", [])
    if not isinstance(links_doc, list) or not isinstance(obs_doc, list):
        raise SceneError(SceneError.SCHEMA, "'links' and 'obstacles' must be arrays")
    links = []
    for i, d in enumerate(links_doc):
        where = f"links[{i}]"
        links.append(Link(_name(d, where), _shape(_field(d, "shape", where), f"{where}.shape"),
                          _pose(d.get("pose"), f"{where}.pose")))
    obstacles = []
    for i, d in enumerate(obs_doc):
        where = f"obstacles[{i}]"
        name = _name(d, where)
        shape = _shape(_field(d, "shape", where), f"{where}.shape")
        pose = _pose(d.get("pose"), f"{where}.pose")
        cov = _covariance(_field(d, "covariance", where), f"{where}.covariance")
        frame = d.get("frame", "local")
        if frame == "world":
            cov = sigma_local_from_world(pose, cov)
        elif frame != "local":
            raise SceneError(SceneError.SCHEMA, f"{where}.frame must be 'local' or 'world', got {frame!r}")
        obstacles.append(SceneObstacle(name, UncertainObstacle(shape, pose, cov)))
    return Scene(links, obstacles)


def parse_scene(text: str) -> Scene:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneError(SceneError.SYNTAX, exc.msg, exc.lineno, exc.colno) from None
    return scene_from_dict(doc)


def load_scene(path: Union[str, Path]) -> Scene:
    return parse_scene(Path(path).read_text(encoding="utf-8"))


# ------------------------------------------------------------ serializing


def _shape_dict(shape: ConvexBody) -> dict:
    if isinstance(shape, Box):
        return {"kind": "box", "half_extents": shape.half_extents.tolist()}
    if isinstance(shape, Sphere):
        return {"kind": "sphere", "radius": float(shape.radius)}
    if isinstance(shape, Polytope):
        return {"kind": "polytope", "vertices": shape.vertices.tolist()}
    if isinstance(shape, Cylinder):
        return {"kind": "cylinder", "radius": float(shape.radius), "half_height": float(shape.half_height)}
    raise TypeError(f"{type(shape).__name__} has no scene-file representation")


def _pose_dict(pose: Pose) -> dict:
    return {"rotation": pose.rotation.tolist(), "translation": pose.translation.tolist()}


def scene_to_dict(scene: Scene) -> dict:
    return {
        "version": VERSION,
        "links": [{"name": l.name, "shape": _shape_dict(l.shape), "pose": _pose_dict(l.pose)} for l in scene.links],
        "obstacles": [
            {
                "name": o.name,
                "shape": _shape_dict(o.obstacle.nominal),
                "pose": _pose_dict(o.obstacle.pose),
                "covariance": o.obstacle.sigma_local.tolist(),
                "frame": "local",
            }
            for o in scene.obstacles
        ],
    }


def dump_scene(scene: Scene) -> str:
    return json.dumps(scene_to_dict(scene), indent=2) + "\n"


# ------------------------------------------------------------- generators


def ring_poses(n: int, radius: float, z: float = 0.0) -> List[Pose]:
    """``n`` poses at equal angles on a horizontal circle, each rotated so its
    local x axis points radially outward."""
    poses = []
    for k in range(n):
        a = 2.0 * math.pi * k / n
        r = rotation_z(a)
        poses.append(Pose(r, np.array([radius * math.cos(a), radius * math.sin(a), z])))
    return poses


def gen_ring_scene(center_obstacle: ConvexBody, n_links: int, radius: float,
                   sigma=None, link_shape: Optional[ConvexBody] = None) -> Scene:
    """``n_links`` identical links evenly spaced on a circle around a single
    obstacle at the origin: every link is equally close, so none can be
    screened out early."""
    if n_links < 1:
        raise ValueError("n_links must be >= 1")
    if not radius > 0:
        raise ValueError("radius must be > 0")
    sigma = 0.01 * np.eye(3) if sigma is None else sigma
    link_shape = link_shape if link_shape is not None else Box([0.05, 0.05, 0.25])
    links = [Link(f"link{k}", link_shape, p) for k, p in enumerate(ring_poses(n_links, radius))]
    obstacle = SceneObstacle("center", UncertainObstacle(center_obstacle, Pose(), sigma))
    return Scene(links, [obstacle])


def gen_obstacle_ring_scene(n_obstacles: int, radius: float, n_links: int = 1,
                            obstacle_shape: Optional[ConvexBody] = None, sigma=None,
                            link_radius: float = 0.05, link_half_height: float = 0.25) -> Scene:
    """The converse arrangement: obstacles evenly spaced around a central
    column of ``n_links`` stacked z-axis cylinders.

    Obstacles are rotated to face the column, so every obstacle sees the
    same geometry and per-obstacle query cost is independent of its index.
    """
    if n_obstacles < 1 or n_links < 1:
        raise ValueError("need at least one obstacle and one link")
    if not radius > 0:
        raise ValueError("radius must be > 0")
    sigma = 0.01 * np.eye(3) if sigma is None else sigma
    obstacle_shape = obstacle_shape if obstacle_shape is not None else Box([0.1, 0.1, 0.1])
    column = Cylinder(link_radius, link_half_height)
    pitch = 2.0 * link_half_height
    links = [Link(f"link{k}", column, Pose.from_translation([0.0, 0.0, (k - (n_links - 1) / 2.0) * pitch]))
             for k in range(n_links)]
    obstacles = [SceneObstacle(f"obstacle{k}", UncertainObstacle(obstacle_shape, p, sigma))
                 for k, p in enumerate(ring_poses(n_obstacles, radius))]
    return Scene(links, obstacles)


def scale_covariances(scene: Scene, alpha: float) -> Scene:
    """Multiply every obstacle covariance by ``alpha`` (standard deviations
    scale by ``sqrt(alpha)``)."""
    if not (math.isfinite(alpha) and alpha > 0):
        raise ValueError(f"alpha must be finite and > 0, got {alpha}")
    obstacles = [
        SceneObstacle(o.name, replace(o.obstacle, sigma_local=alpha * o.obstacle.sigma_local))
        for o in scene.obstacles
    ]
    return Scene(scene.links, obstacles)


def fixture_path(name: str) -> Path:
    return FIXTURES / name
