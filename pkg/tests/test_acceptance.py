"""Acceptance criteria, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line (visible with ``pytest -v``
output teed or ``-s``) and then asserts.
"""
import math
import time

import numpy as np
import pytest

from riskcert.certify import LinkSet, Method, certify_one_shot, certify_two_shot
from riskcert.chi2 import chi2_cdf, chi2_inv, chi2_sf
from riskcert.cli import bench_scene, main as cli_main, time_queries
from riskcert.geometry import Box, Cylinder, Polytope, Pose, Posed, Sphere, point
from riskcert.gjk import distance as gjk_distance
from riskcert.oracle import mc_collision_probability, mc_shadow_mass
from riskcert.scene import fixture_path, load_scene
from riskcert.shadow import ShadowKind, ShadowSpec, UncertainObstacle
from oracles import (ball_hit_probability, chi2_cdf_closed_k3, chi2_inv_quad, lp_intersects, random_covariance, random_polytope,
                     random_rotation, socp_distance)

TOL = 1e-6


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
    assert ok, detail


# ------------------------------------------------------------ random scenes


def _random_shape(rng, lo, hi):
    kind = rng.integers(4)
    if kind == 0:
        return Box(rng.uniform(lo, hi, 3))
    if kind == 1:
        return Sphere(rng.uniform(lo, hi))
    if kind == 2:
        return Cylinder(rng.uniform(lo, hi), rng.uniform(lo, hi))
    return Polytope(random_polytope(rng, np.zeros(3), rng.uniform(lo, hi), max_vertices=10))


def _random_sigma(rng):
    s = random_covariance(rng, rng.uniform(0.05, 0.4))
    if rng.random() < 0.1:
        # rank-deficient case
        lam, vec = np.linalg.eigh(s)
        lam[0] = 0.0
        s = (vec * lam) @ vec.T
        s = 0.5 * (s + s.T)
    return s


def random_scene(rng):
    links = [Posed(_random_shape(rng, 0.03, 0.3), Pose(random_rotation(rng), rng.uniform(-0.6, 0.6, 3)))
             for _ in range(int(rng.integers(1, 7)))]
    obstacles = [UncertainObstacle(_random_shape(rng, 0.05, 0.3), Pose(random_rotation(rng), rng.uniform(-1.2, 1.2, 3)),
                                   _random_sigma(rng))
                 for _ in range(int(rng.integers(1, 4)))]
    return links, obstacles


@pytest.fixture(scope="module")
def sweep_results():
    rng = np.random.default_rng(20260101)
    out = []
    t0 = time.perf_counter()
    for i in range(200):
        links, obstacles = random_scene(rng)
        ls = LinkSet(links)
        for ob in obstacles:
            one = certify_one_shot(ls, ob, TOL)
            two = certify_two_shot(ls, ob, TOL)
            mc = mc_collision_probability(ls, ob, 100_000, seed=i)
            out.append((one, two, mc))
    return out, time.perf_counter() - t0


def test_criterion_1_soundness(sweep_results, capsys):
    results, elapsed = sweep_results
    bad_one = sum(one.epsilon < mc.estimate - mc.ci_half_width_3sigma for one, _, mc in results)
    bad_two = sum(two.epsilon < mc.estimate - mc.ci_half_width_3sigma for _, two, mc in results)
    nontrivial = sum(0 < mc.estimate < 1 for _, _, mc in results)
    ok = bad_one == 0 and bad_two == 0 and elapsed < 300
    report(capsys, 1, ok, f"{len(results)} obstacles in 200 scenes ({nontrivial} with 0 < MC < 1); "
                          f"violations one-shot={bad_one} two-shot={bad_two}; {elapsed:.1f} s (budget 300 s)")


def test_criterion_2_dominance(sweep_results, capsys):
    results, _ = sweep_results
    bad = sum(two.epsilon > one.epsilon + 1e-6 for one, two, _ in results)
    gain = np.median([two.epsilon / one.epsilon for one, two, _ in results if 0.01 < one.epsilon < 0.99])
    report(capsys, 2, bad == 0, f"two-shot > one-shot + 1e-6 in {bad}/{len(results)} cases; "
                                f"median two/one ratio on unsaturated cases {gain:.3f}")


def test_criterion_3_halving(capsys):
    scene = load_scene(fixture_path("one_sided.json"))
    ls = LinkSet(scene.link_bodies())
    ob = scene.obstacles[0].obstacle
    one = certify_one_shot(ls, ob, TOL).epsilon
    two = certify_two_shot(ls, ob, TOL).epsilon
    ok = 0.5 * one - TOL <= two <= 0.55 * one
    report(capsys, 3, ok, f"one-shot {one:.6f}, two-shot {two:.6f}, ratio {two / one:.4f} "
                          f"(required [0.5 - tol/eps1, 0.55])")


TRIPLES = [(2.0, 0.5, 0.3), (1.0, 0.2, 0.5), (3.0, 1.0, 1.0), (1.5, 0.1, 0.4), (0.8, 0.3, 0.25),
           (5.0, 2.0, 1.5), (1.2, 0.6, 0.2), (2.5, 0.5, 0.8), (0.6, 0.1, 0.15), (4.0, 0.5, 2.0)]


def test_criterion_4_analytic(capsys):
    cert_err, mc_misses, true_misses, details = [], 0, 0, []
    for L, r, s in TRIPLES:
        ob = UncertainObstacle(Sphere(r), Pose.from_translation([L, 0, 0]), s * s * np.eye(3))
        exact = chi2_sf(((L - r) / s) ** 2, 3)
        cert_err.append(abs(certify_one_shot([point([0, 0, 0])], ob, TOL).epsilon - exact))
        mc = mc_collision_probability([point([0, 0, 0])], ob, 1_000_000, seed=4)
        if abs(mc.estimate - exact) > mc.ci_half_width_3sigma:
            mc_misses += 1
            details.append(f"({L},{r},{s}): MC {mc.estimate:.5f} vs {exact:.5f}")
        # the hit probability itself is a noncentral chi-squared CDF
        true_misses += abs(mc.estimate - ball_hit_probability(L, r, s)) > mc.ci_half_width_3sigma
    cert_ok = max(cert_err) <= TOL
    ok = cert_ok and mc_misses == 0
    report(capsys, 4, ok, f"certificate max |err| {max(cert_err):.2e} (tol 1e-6, {'ok' if cert_ok else 'bad'}); "
                          f"MC outside 3 sigma of the closed form in {mc_misses}/10 triples"
                          + (f", e.g. {details[0]}" if details else "")
                          + f"; MC outside 3 sigma of the noncentral chi-squared hit probability in {true_misses}/10")


def test_criterion_5_shadow_mass(capsys):
    ob = UncertainObstacle(Box([0.1, 0.2, 0.3]), Pose(random_rotation(np.random.default_rng(5))),
                           np.array([[0.2, 0.05, 0.01], [0.05, 0.1, 0.0], [0.01, 0.0, 0.3]]))
    n = np.array([0.48, 0.6, 0.64])
    n /= np.linalg.norm(n)
    worst = 0.0
    for i, eps in enumerate((0.1, 0.3, 0.5, 0.7)):
        for spec in (ShadowSpec(ShadowKind.FULL, eps), ShadowSpec(ShadowKind.HALF, eps, n)):
            m = mc_shadow_mass(ob, spec, 100_000, seed=i)
            worst = max(worst, abs(m.estimate - spec.captured_mass) / m.ci_half_width_3sigma)
    report(capsys, 5, worst <= 1.0, f"largest deviation {worst:.2f} x (3 sigma) over 8 shadow specs")


def test_criterion_6_gjk_vs_lp(capsys):
    rng = np.random.default_rng(6)
    mismatches = band = 0
    worst = 0.0
    for _ in range(1000):
        va = random_polytope(rng, np.zeros(3), rng.uniform(0.2, 1.0))
        vb = random_polytope(rng, rng.uniform(-2, 2, 3), rng.uniform(0.2, 1.0))
        res = gjk_distance(Polytope(va), Polytope(vb))
        lp_hit = lp_intersects(va, vb)
        ref = 0.0 if lp_hit else socp_distance(va, vb)[0]
        gjk_touch = res.intersecting or res.distance < 1e-6
        if ref < 1e-6:
            # touching band: either verdict is accepted, a clear separation is not
            band += 1
            mismatches += not gjk_touch
        elif res.intersecting:
            mismatches += 1
        else:
            worst = max(worst, abs(res.distance - ref))
    ok = mismatches == 0 and worst <= 1e-5
    report(capsys, 6, ok, f"1000 pairs: {mismatches} verdict mismatches outside the touching band "
                          f"({band} intersecting or touching), max distance error {worst:.2e}")


def test_criterion_7_iterations(capsys):
    scene = load_scene(fixture_path("arm_scene.json"))
    ls = LinkSet(scene.link_bodies())
    bad = []
    for tol in (1e-2, 1e-3, 1e-4, 1e-5, 1e-6):
        want = math.ceil(math.log2(1 / tol))
        for o in scene.obstacles:
            one = certify_one_shot(ls, o.obstacle, tol).collision_checks
            two = certify_two_shot(ls, o.obstacle, tol).collision_checks
            if abs(one - want) > 1 or two > 2 * one:
                bad.append((tol, o.name, one, two))
    report(capsys, 7, not bad, "one-shot checks within ceil(log2(1/tol)) +/- 1 and two-shot <= 2x one-shot"
                               + (f"; violations {bad}" if bad else " for all tolerances and obstacles"))


def _bench(argv, capsys):
    code = cli_main(argv)
    out = capsys.readouterr().out
    lines = out.strip().splitlines()[1:]
    return code, [line.split(",") for line in lines]


def test_criterion_8_performance(capsys):
    times = time_queries(bench_scene(4, 1), Method.TWO_SHOT, 1e-6, 10_000)
    median_us = float(np.median(times)) * 1e6
    code, rows = _bench(["bench", "--links", "4", "--repeat", "10000", "--csv"], capsys)
    mean_us = float(rows[0][3])

    _, link_rows = _bench(["bench", "--links", "1,2,4,8", "--repeat", "2000", "--csv"], capsys)
    t_links = [float(r[3]) for r in link_rows]
    link_ratios = [b / a for a, b in zip(t_links, t_links[1:])]

    _, obs_rows = _bench(["bench", "--links", "4", "--obstacles", "1,2,4,8", "--repeat", "1000", "--csv"], capsys)
    t_obs = [float(r[3]) for r in obs_rows]
    obs_spread = max(abs(t / t_obs[0] - 1) for t in t_obs)

    _, tol_rows = _bench(["bench", "--links", "4", "--tol", "1e-2,1e-6", "--repeat", "2000", "--csv"], capsys)
    t_tol = [float(r[3]) for r in tol_rows]
    ring = bench_scene(4, 1)
    ls = LinkSet(ring.link_bodies())
    checks = [certify_two_shot(ls, ring.obstacles[0].obstacle, t).collision_checks for t in (1e-2, 1e-6)]
    time_ratio, check_ratio = t_tol[1] / t_tol[0], checks[1] / checks[0]
    tol_ok = abs(time_ratio / check_ratio - 1) <= 0.5

    ok = (code == 0 and median_us < 1000 and max(link_ratios) <= 2.5 and obs_spread <= 0.3 and tol_ok)
    report(capsys, 8, ok,
           f"4-link ring two-shot median {median_us:.1f} us (mean {mean_us:.1f} us, limit 1000); "
           f"links 1/2/4/8 {['%.0f' % t for t in t_links]} us, max doubling ratio {max(link_ratios):.2f} (<= 2.5); "
           f"obstacles 1/2/4/8 spread {100 * obs_spread:.0f}% (<= 30%); "
           f"tol 1e-2 -> 1e-6 time ratio {time_ratio:.2f} vs check ratio {check_ratio:.2f}")


def test_criterion_9_chi2(capsys):
    trip = max(abs(chi2_cdf(chi2_inv(p, 3), 3) - p) for p in np.arange(1, 100) / 100)
    closed = max(abs(chi2_cdf(x, 3) - chi2_cdf_closed_k3(x)) for x in np.linspace(0, 50, 5001))
    median = chi2_inv_quad(0.5, 3)
    med_err = abs(chi2_inv(0.5, 3) - median)
    ok = trip < 1e-10 and closed < 1e-12 and abs(median - 2.3660) < 5e-4 and med_err < 5e-4
    report(capsys, 9, ok, f"round trip {trip:.1e} (< 1e-10), closed form {closed:.1e} (< 1e-12), "
                          f"median {chi2_inv(0.5, 3):.6f} vs quadrature {median:.6f}")


def test_criterion_10_saturation(capsys):
    remote = load_scene(fixture_path("remote.json"))
    colliding = load_scene(fixture_path("colliding.json"))
    lines = []
    ok = True
    for fn in (certify_one_shot, certify_two_shot):
        r = fn(remote.link_bodies(), remote.obstacles[0].obstacle, TOL)
        c = fn(colliding.link_bodies(), colliding.obstacles[0].obstacle, TOL)
        ok &= r.epsilon <= TOL and r.saturated_low and c.epsilon >= 1 - TOL
        lines.append(f"{r.method.value}: remote {r.epsilon:.2e} (saturated_low={r.saturated_low}), "
                     f"colliding {c.epsilon:.6f}")
    report(capsys, 10, ok, "; ".join(lines))
