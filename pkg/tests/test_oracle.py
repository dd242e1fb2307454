import math

import numpy as np
import pytest

from riskcert.certify import certify_one_shot
from riskcert.geometry import Box, Pose, Sphere, point
from riskcert.oracle import (BLOCK, McEstimate, OracleError, mc_collision_probability, mc_shadow_mass,
                             sample_displacements)
from riskcert.shadow import ShadowKind, ShadowSpec, UncertainObstacle
from oracles import ball_hit_probability


def test_always_colliding():
    ob = UncertainObstacle(Sphere(0.5), Pose(), 1e-12 * np.eye(3))
    assert mc_collision_probability([Box([0.1, 0.1, 0.1])], ob, 2000).estimate == 1.0


def test_remote_never_colliding():
    ob = UncertainObstacle(Sphere(0.1), Pose.from_translation([10, 0, 0]), 1e-4 * np.eye(3))
    e = mc_collision_probability([Box([0.1, 0.1, 0.1])], ob, 2000)
    assert e.estimate == 0.0
    assert e.ci_half_width_3sigma == pytest.approx(3 / 2000)


@pytest.mark.parametrize("L,r,s", [(1.0, 0.2, 0.5), (0.5, 0.3, 0.2), (2.0, 0.5, 1.0)])
def test_point_vs_sphere_matches_noncentral_chi2(L, r, s):
    ob = UncertainObstacle(Sphere(r), Pose.from_translation([L, 0, 0]), s * s * np.eye(3))
    e = mc_collision_probability([point([0, 0, 0])], ob, 100_000, seed=3)
    assert abs(e.estimate - ball_hit_probability(L, r, s)) <= e.ci_half_width_3sigma
    # and the certificate is an upper bound on it
    assert certify_one_shot([point([0, 0, 0])], ob).epsilon >= e.estimate


def test_shadow_mass_examples():
    ob = UncertainObstacle(Box([0.1, 0.1, 0.1]), Pose(), np.diag([0.3, 0.2, 0.1]))
    full = mc_shadow_mass(ob, ShadowSpec(ShadowKind.FULL, 0.5), 100_000, seed=4)
    assert abs(full.estimate - 0.5) <= full.ci_half_width_3sigma
    half = mc_shadow_mass(ob, ShadowSpec(ShadowKind.HALF, 0.5, np.array([0.0, 0.0, 1.0])), 100_000, seed=4)
    assert abs(half.estimate - 0.25) <= half.ci_half_width_3sigma
    tiny = mc_shadow_mass(ob, ShadowSpec(ShadowKind.FULL, 1 - 1e-9), 100_000, seed=4)
    assert tiny.estimate <= tiny.ci_half_width_3sigma


def test_seed_determinism_and_sharding():
    ob = UncertainObstacle(Sphere(0.2), Pose.from_translation([0.6, 0, 0]), 0.05 * np.eye(3))
    links = [Box([0.1, 0.1, 0.3])]
    n = 2 * BLOCK + 1234
    a = mc_collision_probability(links, ob, n, seed=7)
    b = mc_collision_probability(links, ob, n, seed=7)
    c = mc_collision_probability(links, ob, n, seed=7, workers=3)
    assert a == b == c
    assert mc_collision_probability(links, ob, n, seed=8).hits != a.hits


def test_sampler_covariance():
    sigma = np.array([[0.05, 0.07, 0.0], [0.07, 0.1, 0.0], [0.0, 0.0, 0.01]])
    d = sample_displacements(sigma, 1_000_000, seed=5)
    assert np.all(np.abs(np.cov(d.T) - sigma) <= 0.01 * np.abs(sigma).max())


def test_sampler_singular_covariance():
    sigma = np.diag([1.0, 0.0, 0.25])
    d = sample_displacements(sigma, 10_000, seed=6)
    assert np.all(d[:, 1] == 0.0)
    assert abs(d[:, 2].std() - 0.5) < 0.02


def test_gjk_failure_reports_sample_index():
    ob = UncertainObstacle(Sphere(1.0), Pose.from_translation([2.0, 0.0, 0.0]), 1e-6 * np.eye(3))
    with pytest.raises(OracleError) as err:
        mc_collision_probability([Sphere(1.0)], ob, 100, max_iter=1)
    assert 0 <= err.value.sample_index < 100


def test_confidence_interval():
    e = McEstimate.from_counts(250, 1000, 0)
    assert e.ci_half_width_3sigma == pytest.approx(3 * math.sqrt(0.25 * 0.75 / 1000))
    assert McEstimate.from_counts(0, 1000, 0).ci_half_width_3sigma == pytest.approx(3e-3)


@pytest.mark.parametrize("samples,seed", [(0, 0), (10, -1), (10, 2**64)])
def test_argument_errors(samples, seed):
    ob = UncertainObstacle(Sphere(0.1), Pose(), np.eye(3))
    with pytest.raises(ValueError):
        mc_collision_probability([point([0, 0, 0])], ob, samples, seed)
