"""Certified upper bounds on per-obstacle and scene collision risk.

One-shot: bisect on the risk level ``eps`` until the largest full shadow
that misses every link is pinned down to ``eps_tol``; that ``eps`` bounds the
collision probability.

Two-shot: after the one-shot search, take the contact normal between the
final shadow and the link it nearly touches, and bisect again over half
shadows that only grow away from that link. The union of the two shadows
misses the robot and leaves out probability ``(eps1 + eps2) / 2``.

Scene bounds add per-obstacle bounds (union bound), clipped to 1.
"""
from __future__ import annotations

import enum
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from . import _kernels as K
from .chi2 import chi2_isf
from .geometry import ConvexBody
from .gjk import DEGENERATE_DISTANCE
from .shadow import DOF, UncertainObstacle, eps_min


class Method(enum.Enum):
    ONE_SHOT = "one-shot"
    TWO_SHOT = "two-shot"
    ONE_SHOT_FALLBACK = "one-shot-fallback"


class CertificationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class CertifiedBound:
    """Result of one obstacle query.

    ``eps_lower``/``eps_upper`` is the final bisection bracket of the last
    phase that ran. ``epsilon`` is the certified bound: the bracket's upper
    end for one-shot, ``(eps1 + eps2) / 2`` for two-shot.
    """

    epsilon: float
    eps_lower: float
    eps_upper: float
    method: Method
    eps1: Optional[float] = None
    eps2: Optional[float] = None
    normal: Optional[np.ndarray] = None
    normal_fallback: bool = False
    saturated_low: bool = False
    saturated_high: bool = False
    collision_checks: int = 0
    gjk_runs: int = 0
    elapsed: float = 0.0  # seconds
    phase1_bracket: Tuple[float, float] = (0.0, 1.0)

    def key(self):
        """Every deterministic field, for bitwise comparisons (no timing)."""
        n = None if self.normal is None else tuple(self.normal.tolist())
        return (self.epsilon, self.eps_lower, self.eps_upper, self.method, self.eps1, self.eps2, n,
                self.normal_fallback, self.saturated_low, self.saturated_high, self.collision_checks,
                self.gjk_runs, self.phase1_bracket)


@dataclass(frozen=True, eq=False)
class RiskReport:
    per_obstacle: List[CertifiedBound]
    scene_bound: float
    names: List[str] = field(default_factory=list)


class LinkSet:
    """Robot links flattened once so many obstacle queries can share them."""

    def __init__(self, links: Sequence[ConvexBody]):
        links = list(links)
        if not links:
            raise CertificationError("at least one robot link is required")
        self.bodies = links
        self.flat, self.starts = K.pack(links)
        self.extra = K.make_extra()
        self.spheres = K.link_spheres(self.flat, self.starts, self.extra)

    def __len__(self):
        return len(self.bodies)


def _as_linkset(links) -> LinkSet:
    return links if isinstance(links, LinkSet) else LinkSet(links)


class _Obstacle:
    def __init__(self, obstacle: UncertainObstacle):
        self.flat, starts = K.pack([obstacle.body])
        self.hi = int(starts[1])
        self.sigma = obstacle.sigma_world

    def extra(self, flag, normal=None):
        return K.make_extra(flag, 0.0, self.sigma, normal)


def _check_tol(eps_tol):
    if not (0.0 < eps_tol <= 0.5):
        raise CertificationError(f"eps_tol must lie in (0, 0.5], got {eps_tol}")


def _bisect(ls: LinkSet, ob: _Obstacle, ex, lo, hi, eps_tol, max_iter):
    out = K.bisect(ls.flat, ls.starts, ls.spheres, ls.extra, ob.flat, 0, ob.hi, ex,
                   lo, hi, eps_tol, eps_min(eps_tol), max_iter)
    lo, hi, steps, runs, last_hit, err_eps = out
    if err_eps >= 0.0:
        raise CertificationError(f"GJK did not converge while checking the shadow at eps={err_eps:.6g}")
    return float(lo), float(hi), int(steps), int(runs), int(last_hit)


def _probe_centroid(flat, lo, hi, ex):
    pts = [K.support(flat, lo, hi, ex, *u) for u in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))]
    return np.mean(np.asarray(pts, dtype=float), axis=0)


def _contact_normal(ls: LinkSet, ob: _Obstacle, eps1, link, max_iter):
    """Normal from ``link`` into the full shadow at ``eps1`` (which misses it)."""
    ex = ob.extra(K.FULL)
    ex[1] = chi2_isf(eps1, DOF)
    lo, hi = int(ls.starts[link]), int(ls.starts[link + 1])
    status, dist, ax, ay, az, bx, by, bz, _ = K.gjk(ob.flat, 0, ob.hi, ex, ls.flat, lo, hi, ls.extra, False, max_iter)
    if status == K.CAP_EXCEEDED:
        raise CertificationError("GJK did not converge while extracting the contact normal")
    if status == K.SEPARATED and dist >= DEGENERATE_DISTANCE:
        n = np.array([ax - bx, ay - by, az - bz])
        return n / np.linalg.norm(n), False
    n = _probe_centroid(ob.flat, 0, ob.hi, ob.extra(K.NO_SHADOW)) - _probe_centroid(ls.flat, lo, hi, ls.extra)
    norm = np.linalg.norm(n)
    if norm < DEGENERATE_DISTANCE:
        return None, True
    return n / norm, True


def _one_shot(ls, ob, eps_tol, max_iter):
    lo, hi, steps, runs, last_hit = _bisect(ls, ob, ob.extra(K.FULL), 0.0, 1.0, eps_tol, max_iter)
    return lo, hi, steps, runs, last_hit


def certify_one_shot(links, obstacle: UncertainObstacle, eps_tol: float = 1e-6,
                     max_iter: int = K.GJK_MAX_ITER) -> CertifiedBound:
    """Bisection over full shadows on ``[0, 1]``; returns the bracket's safe end."""
    _check_tol(eps_tol)
    ls = _as_linkset(links)
    t0 = time.perf_counter()
    ob = _Obstacle(obstacle)
    lo, hi, steps, runs, _ = _one_shot(ls, ob, eps_tol, max_iter)
    elapsed = time.perf_counter() - t0
    return CertifiedBound(
        epsilon=hi, eps_lower=lo, eps_upper=hi, method=Method.ONE_SHOT,
        saturated_low=lo == 0.0, saturated_high=hi == 1.0,
        collision_checks=steps, gjk_runs=runs, elapsed=elapsed, phase1_bracket=(lo, hi),
    )


def certify_two_shot(links, obstacle: UncertainObstacle, eps_tol: float = 1e-6,
                     max_iter: int = K.GJK_MAX_ITER) -> CertifiedBound:
    """One-shot search, then a warm-started search over half shadows that
    expand away from the first contact."""
    _check_tol(eps_tol)
    ls = _as_linkset(links)
    t0 = time.perf_counter()
    ob = _Obstacle(obstacle)
    lo1, eps1, steps, runs, last_hit = _one_shot(ls, ob, eps_tol, max_iter)
    common = dict(saturated_low=lo1 == 0.0, saturated_high=eps1 == 1.0, phase1_bracket=(lo1, eps1))
    if lo1 == 0.0 or eps1 == 1.0:
        # nothing to expand into (risk ~0) or nominal collision (risk 1)
        return CertifiedBound(
            epsilon=eps1, eps_lower=lo1, eps_upper=eps1, method=Method.TWO_SHOT, eps1=eps1, eps2=eps1,
            collision_checks=steps, gjk_runs=runs, elapsed=time.perf_counter() - t0, **common,
        )
    normal, fallback = _contact_normal(ls, ob, eps1, last_hit, max_iter)
    if normal is None:
        return CertifiedBound(
            epsilon=eps1, eps_lower=lo1, eps_upper=eps1, method=Method.ONE_SHOT_FALLBACK, eps1=eps1,
            normal_fallback=True, collision_checks=steps, gjk_runs=runs,
            elapsed=time.perf_counter() - t0, **common,
        )
    lo2, eps2, steps2, runs2, _ = _bisect(ls, ob, ob.extra(K.HALF, normal), 0.0, eps1, eps_tol, max_iter)
    elapsed = time.perf_counter() - t0
    return CertifiedBound(
        epsilon=0.5 * (eps1 + eps2), eps_lower=lo2, eps_upper=eps2, method=Method.TWO_SHOT,
        eps1=eps1, eps2=eps2, normal=normal, normal_fallback=fallback,
        collision_checks=steps + steps2, gjk_runs=runs + runs2, elapsed=elapsed, **common,
    )


_METHODS = {
    Method.ONE_SHOT: certify_one_shot,
    Method.TWO_SHOT: certify_two_shot,
}


def certify(links, obstacle, method: Union[Method, str] = Method.TWO_SHOT, eps_tol=1e-6) -> CertifiedBound:
    return _METHODS[Method(method)](links, obstacle, eps_tol)


def aggregate(bounds: Sequence[CertifiedBound], names: Optional[Sequence[str]] = None) -> RiskReport:
    total = math.fsum(b.epsilon for b in bounds)
    return RiskReport(list(bounds), min(1.0, total), list(names) if names is not None else [])


def certify_scene(scene, method: Union[Method, str] = Method.TWO_SHOT, eps_tol: float = 1e-6,
                  workers: int = 1) -> RiskReport:
    """Certify every obstacle of ``scene`` independently and add up.

    With ``workers > 1`` obstacles are certified on a thread pool; results
    are merged by obstacle index and identical to a sequential run.
    """
    method = Method(method)
    names = [o.name for o in scene.obstacles]
    if not scene.obstacles:
        return aggregate([], [])
    ls = LinkSet(scene.link_bodies())
    fn = _METHODS[method]

    def run(item):
        name, obstacle = item
        try:
            return fn(ls, obstacle, eps_tol)
        except Exception as exc:
            raise CertificationError(f"obstacle {name!r}: {exc}") from exc

    items = [(o.name, o.obstacle) for o in scene.obstacles]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            bounds = list(pool.map(run, items))
    else:
        bounds = [run(it) for it in items]
    return aggregate(bounds, names)
