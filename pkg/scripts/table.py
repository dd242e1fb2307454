"""Per-method summary on one scene: mean run time per obstacle, certified
scene risk and Monte Carlo risk, in the layout of a results table.

    python scripts/table.py --repeat 100000 --samples 1000000
"""
import argparse

import numpy as np

from riskcert.certify import LinkSet, Method, certify_one_shot, certify_two_shot
from riskcert.cli import time_interleaved
from riskcert.oracle import mc_collision_probability
from riskcert.scene import fixture_path, load_scene


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--scene", default=str(fixture_path("arm_scene.json")))
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--repeat", type=int, default=10_000)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    scene = load_scene(args.scene)
    ls = LinkSet(scene.link_bodies())
    obstacles = [o.obstacle for o in scene.obstacles]
    mc = [mc_collision_probability(ls, ob, args.samples, args.seed) for ob in obstacles]
    true_risk = sum(m.estimate for m in mc)

    print(f"{'method':<10} {'us/obstacle':>12} {'certified':>12} {'monte carlo':>12} {'ratio':>8}")
    for method, fn in ((Method.ONE_SHOT, certify_one_shot), (Method.TWO_SHOT, certify_two_shot)):
        times = time_interleaved([scene], method, [args.tol], args.repeat)[0][0]
        bound = sum(fn(ls, ob, args.tol).epsilon for ob in obstacles)
        print(f"{method.value:<10} {1e6 * float(np.mean(times)):>12.2f} {bound:>12.6f} {true_risk:>12.6f} "
              f"{bound / true_risk if true_risk else float('inf'):>8.2f}")
    print()
    print("per obstacle:")
    for o, m in zip(scene.obstacles, mc):
        one = certify_one_shot(ls, o.obstacle, args.tol).epsilon
        two = certify_two_shot(ls, o.obstacle, args.tol).epsilon
        print(f"  {o.name:<18} one-shot {one:.6f}  two-shot {two:.6f}  mc {m.estimate:.6f} +/- {m.ci_half_width_3sigma:.6f}")


if __name__ == "__main__":
    main()
