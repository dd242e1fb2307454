"""Intersection, distance and contact-normal queries between convex bodies."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import _kernels as K
from .geometry import ConvexBody

DEGENERATE_DISTANCE = 1e-9


class GJKError(RuntimeError):
    """GJK ran out of iterations. ``margin`` is the best separation upper
    bound reached, i.e. how ambiguous the configuration was."""

    def __init__(self, message, margin=float("nan")):
        super().__init__(message)
        self.margin = margin


@dataclass(frozen=True, eq=False)
class ProximityResult:
    intersecting: bool
    distance: float
    witness_a: Optional[np.ndarray]
    witness_b: Optional[np.ndarray]
    iterations: int


class ContactNormal(NamedTuple):
    normal: Optional[np.ndarray]
    degenerate: bool


def _packed(body):
    fs, starts = K.pack([body])
    return fs, int(starts[0]), int(starts[1])


_NO_EXTRA = K.make_extra()


def _run(a, b, boolean, max_iter):
    fa, la, ha = _packed(a)
    fb, lb, hb = _packed(b)
    out = K.gjk(fa, la, ha, _NO_EXTRA, fb, lb, hb, _NO_EXTRA, boolean, max_iter)
    if out[0] == K.CAP_EXCEEDED:
        raise GJKError(f"GJK did not converge in {max_iter} iterations", margin=out[1])
    return out


def intersects(a: ConvexBody, b: ConvexBody, max_iter: int = K.GJK_MAX_ITER) -> bool:
    """True iff the bodies overlap (touching within ~1e-9 counts as overlap).

    A bounding-sphere test built from axis support probes rejects clearly
    separated pairs before GJK runs.
    """
    fa, la, ha = _packed(a)
    fb, lb, hb = _packed(b)
    sa = K.bounding_sphere(fa, la, ha, _NO_EXTRA)
    sb = K.bounding_sphere(fb, lb, hb, _NO_EXTRA)
    if K.spheres_disjoint(*sa, *sb):
        return False
    out = K.gjk(fa, la, ha, _NO_EXTRA, fb, lb, hb, _NO_EXTRA, True, max_iter)
    if out[0] == K.CAP_EXCEEDED:
        raise GJKError(f"GJK did not converge in {max_iter} iterations", margin=out[1])
    return out[0] == K.INTERSECTING


def distance(a: ConvexBody, b: ConvexBody, max_iter: int = K.GJK_MAX_ITER) -> ProximityResult:
    """Separation distance with closest points ``witness_a`` on ``a`` and
    ``witness_b`` on ``b`` (both ``None`` when the bodies intersect)."""
    status, dist, ax, ay, az, bx, by, bz, it = _run(a, b, False, max_iter)
    if status == K.INTERSECTING:
        return ProximityResult(True, 0.0, None, None, int(it))
    return ProximityResult(False, float(dist), np.array([ax, ay, az]), np.array([bx, by, bz]), int(it))


def centroid_probe(body: ConvexBody) -> np.ndarray:
    """Average of the six axis-aligned support points."""
    axes = np.vstack([np.eye(3), -np.eye(3)])
    return np.mean([body.support(u) for u in axes], axis=0)


def contact_normal_into(shadow: ConvexBody, link: ConvexBody, obstacle: Optional[ConvexBody] = None) -> ContactNormal:
    """Unit normal at the shadow/link interface, pointing from the link into
    the shadow.

    When the closest points coincide (separation below 1e-9) the direction
    from the link's centroid probe to the obstacle's centroid probe is used
    instead (``obstacle`` defaults to ``shadow``), and the result is flagged
    degenerate. If that direction is also zero, ``normal`` is ``None``.
    """
    res = distance(shadow, link)
    if not res.intersecting and res.distance >= DEGENERATE_DISTANCE:
        n = res.witness_a - res.witness_b
        return ContactNormal(n / np.linalg.norm(n), False)
    n = centroid_probe(obstacle if obstacle is not None else shadow) - centroid_probe(link)
    norm = np.linalg.norm(n)
    if norm < DEGENERATE_DISTANCE:
        return ContactNormal(None, True)
    return ContactNormal(n / norm, True)
