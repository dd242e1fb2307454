"""Monte Carlo ground truth for collision probability and shadow mass.

Displacements come in fixed-size blocks; block ``b`` of a run with seed ``s``
is drawn from its own Philox stream keyed by ``(s, b)``. Any split of the
blocks across workers therefore reproduces the sequential tallies exactly.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np

from . import _kernels as K
from .certify import LinkSet
from .shadow import ShadowSpec, UncertainObstacle, in_displacement_set

BLOCK = 1 << 16


class OracleError(RuntimeError):
    def __init__(self, message, sample_index=-1):
        super().__init__(message)
        self.sample_index = sample_index


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    samples: int
    ci_half_width_3sigma: float
    seed: int
    hits: int

    @classmethod
    def from_counts(cls, hits: int, samples: int, seed: int) -> "McEstimate":
        p = hits / samples
        ci = max(3.0 * math.sqrt(p * (1.0 - p) / samples), 3.0 / samples)
        return cls(p, samples, ci, seed, hits)


def gaussian_factor(sigma: np.ndarray) -> np.ndarray:
    """``F`` with ``F F^T = sigma``: Cholesky when it succeeds, otherwise the
    eigen factor (singular covariances)."""
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        lam, vec = np.linalg.eigh(sigma)
        return vec * np.sqrt(np.clip(lam, 0.0, None))


def _blocks(samples: int) -> Iterator[Tuple[int, int]]:
    for b, start in enumerate(range(0, samples, BLOCK)):
        yield b, min(BLOCK, samples - start)


def sample_block(factor: np.ndarray, seed: int, block: int, size: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))
    z = rng.standard_normal((size, 3))
    return z @ factor.T


def sample_displacements(sigma: np.ndarray, samples: int, seed: int) -> np.ndarray:
    """All displacements of a run, concatenated in block order."""
    f = gaussian_factor(sigma)
    return np.concatenate([sample_block(f, seed, b, n) for b, n in _blocks(samples)])


def _check(samples, seed):
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    if not (0 <= seed < 2**64):
        raise ValueError("seed must be a 64-bit unsigned integer")


def mc_collision_probability(links, obstacle: UncertainObstacle, samples: int = 100_000,
                             seed: int = 0, workers: int = 1,
                             max_iter: int = K.GJK_MAX_ITER) -> McEstimate:
    """Fraction of randomly displaced copies of the obstacle that touch any link."""
    _check(samples, seed)
    ls = links if isinstance(links, LinkSet) else LinkSet(links)
    flat, starts = K.pack([obstacle.body])
    hi = int(starts[1])
    ex = K.make_extra()
    factor = gaussian_factor(obstacle.sigma_world)

    def run(item):
        b, n = item
        disp = sample_block(factor, seed, b, n)
        flags, failed = K.mc_hits(ls.flat, ls.starts, ls.spheres, ls.extra, flat, 0, hi, ex, disp, max_iter)
        if failed >= 0:
            idx = b * BLOCK + int(failed)
            raise OracleError(f"GJK did not converge on sample {idx}", idx)
        return int(flags.sum())

    items = list(_blocks(samples))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits = sum(pool.map(run, items))
    else:
        hits = sum(run(it) for it in items)
    return McEstimate.from_counts(hits, samples, seed)


def mc_shadow_mass(obstacle: UncertainObstacle, spec: ShadowSpec, samples: int = 100_000,
                   seed: int = 0) -> McEstimate:
    """Fraction of displacements for which the displaced obstacle stays inside
    the shadow described by ``spec``."""
    _check(samples, seed)
    sigma = obstacle.sigma_world
    factor = gaussian_factor(sigma)
    hits = 0
    for b, n in _blocks(samples):
        d = sample_block(factor, seed, b, n)
        hits += int(np.count_nonzero(in_displacement_set(d, sigma, spec)))
    return McEstimate.from_counts(hits, samples, seed)
