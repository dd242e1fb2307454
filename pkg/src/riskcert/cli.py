"""Command-line entry point: ``riskcert {certify,oracle,sweep,bench}``.

Exit codes: 0 success, 1 usage, 2 bad input (unreadable or invalid scene),
3 computation failure. Tables go to stdout (or ``--out``), diagnostics to
stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .certify import CertificationError, LinkSet, Method, certify_one_shot, certify_two_shot
from .geometry import Box
from .gjk import GJKError
from .oracle import OracleError, mc_collision_probability
from .scene import (Scene, SceneError, gen_obstacle_ring_scene, gen_ring_scene, load_scene,
                    scale_covariances)

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_COMPUTE = 0, 1, 2, 3

CERTIFY_COLUMNS = ["obstacle", "method", "eps", "eps1", "eps2", "eps_lo", "eps_hi", "saturated", "checks", "micros"]
ORACLE_COLUMNS = ["obstacle", "estimate", "ci3", "samples", "seed"]
SWEEP_COLUMNS = ["alpha", "obstacle", "eps_one_shot", "eps_two_shot", "eps_mc", "rel_err_one", "rel_err_two"]
BENCH_COLUMNS = ["links", "obstacles", "tol", "mean_micros_per_obstacle", "method"]

DEFAULT_ALPHAS = (0.25, 0.5, 1.0, 2.0, 4.0)
BENCH_RING_RADIUS = 0.6
BENCH_REPEAT = 10_000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    scene: Optional[str] = None
    method: Method = Method.TWO_SHOT
    tols: List[float] = field(default_factory=lambda: [1e-6])
    samples: int = 100_000
    seed: int = 0
    repeat: Optional[int] = None
    alphas: List[float] = field(default_factory=lambda: list(DEFAULT_ALPHAS))
    links: List[int] = field(default_factory=lambda: [4])
    obstacles: List[int] = field(default_factory=lambda: [1])
    csv: bool = False
    out: Optional[str] = None

    @property
    def tol(self) -> float:
        return self.tols[0]

    def validate(self):
        if not self.tols or any(not (0.0 < t <= 0.5) for t in self.tols):
            raise UsageError("--tol must lie in (0, 0.5]")
        if self.command not in ("bench",) and len(self.tols) != 1:
            raise UsageError("--tol takes a single value for this command")
        if self.samples < 1:
            raise UsageError("--samples must be >= 1")
        if not (0 <= self.seed < 2**64):
            raise UsageError("--seed must be a 64-bit unsigned integer")
        if self.repeat is not None and self.repeat < 1:
            raise UsageError("--repeat must be >= 1")
        if any(not (math.isfinite(a) and a > 0) for a in self.alphas):
            raise UsageError("--alphas must be finite and > 0")
        if any(n < 1 for n in self.links + self.obstacles):
            raise UsageError("--links and --obstacles must be >= 1")
        if self.command != "bench" and self.scene is None:
            raise UsageError(f"{self.command} requires --scene")


def _floats(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None


def parse_range(text: str) -> List[int]:
    """``"4"``, ``"1,2,4,8"`` or ``"1-8"`` (inclusive)."""
    try:
        out = []
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                a, b = (int(x) for x in part.split("-", 1))
                if b < a:
                    raise ValueError
                out.extend(range(a, b + 1))
            elif part:
                out.append(int(part))
        if not out:
            raise ValueError
        return out
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N, N,M,... or N-M, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="riskcert", description="Certified collision-risk bounds for uncertain obstacles.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in [("certify", "certify every obstacle of a scene"),
                        ("oracle", "Monte Carlo collision probability per obstacle"),
                        ("sweep", "certify and sample over scaled covariances"),
                        ("bench", "time certification on ring scenes or a scene file")]:
        s = sub.add_parser(name, help=help_)
        s.add_argument("--scene", help="scene JSON file")
        s.add_argument("--method", choices=[m.value for m in (Method.ONE_SHOT, Method.TWO_SHOT)], default="two-shot")
        s.add_argument("--tol", type=_floats, default=[1e-6], help="bisection tolerance (bench: comma list)")
        s.add_argument("--samples", type=int, default=100_000)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--repeat", type=int, default=None)
        s.add_argument("--alphas", type=_floats, default=list(DEFAULT_ALPHAS), help="covariance scales")
        s.add_argument("--links", type=parse_range, default=[4], help="link counts for bench")
        s.add_argument("--obstacles", type=parse_range, default=[1], help="obstacle counts for bench")
        s.add_argument("--csv", action="store_true", help="CSV instead of a table")
        s.add_argument("--out", help="write output here instead of stdout")
    return p


def parse_config(argv: Sequence[str]) -> RunConfig:
    ns = build_parser().parse_args(list(argv))
    cfg = RunConfig(command=ns.command, scene=ns.scene, method=Method(ns.method), tols=ns.tol,
                    samples=ns.samples, seed=ns.seed, repeat=ns.repeat, alphas=ns.alphas,
                    links=ns.links, obstacles=ns.obstacles, csv=ns.csv, out=ns.out)
    cfg.validate()
    return cfg


# ------------------------------------------------------------------ output


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def render(columns: List[str], rows: List[list], as_csv: bool) -> str:
    cells = [[_fmt(v) for v in r] for r in rows]
    buf = io.StringIO()
    if as_csv:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        w.writerows(cells)
        return buf.getvalue()
    shown = [[c if len(c) <= 14 or not _is_float(c) else f"{float(c):.6g}" for c in r] for r in cells]
    widths = [max([len(h)] + [len(r[i]) for r in shown]) for i, h in enumerate(columns)]
    for r in [columns] + shown:
        buf.write("  ".join(c.rjust(w) for c, w in zip(r, widths)).rstrip() + "\n")
    return buf.getvalue()


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


# ----------------------------------------------------------------- commands

_CERTIFIERS = {Method.ONE_SHOT: certify_one_shot, Method.TWO_SHOT: certify_two_shot}


def certify_rows(scene: Scene, method: Method, tol: float) -> List[list]:
    ls = LinkSet(scene.link_bodies())
    fn = _CERTIFIERS[method]
    rows = []
    for i, o in enumerate(scene.obstacles):
        try:
            if i == 0:
                fn(ls, o.obstacle, tol)  # keep JIT loading out of the first timing
            b = fn(ls, o.obstacle, tol)
        except (CertificationError, GJKError) as exc:
            raise CertificationError(f"obstacle {o.name!r}: {exc}") from exc
        rows.append([o.name, b.method.value, b.epsilon, b.eps1, b.eps2, b.eps_lower, b.eps_upper,
                     b.saturated_low or b.saturated_high, b.collision_checks, round(b.elapsed * 1e6, 3)])
    return rows


def oracle_rows(scene: Scene, samples: int, seed: int) -> List[list]:
    ls = LinkSet(scene.link_bodies())
    rows = []
    for o in scene.obstacles:
        e = mc_collision_probability(ls, o.obstacle, samples, seed)
        rows.append([o.name, e.estimate, e.ci_half_width_3sigma, e.samples, e.seed])
    return rows


def _rel_err(eps: float, mc: float) -> float:
    return eps / mc - 1.0 if mc > 0 else math.inf


def sweep_rows(scene: Scene, alphas: Sequence[float], tol: float, samples: int, seed: int) -> List[list]:
    rows = []
    for alpha in alphas:
        scaled = scale_covariances(scene, alpha)
        ls = LinkSet(scaled.link_bodies())
        for o in scaled.obstacles:
            one = certify_one_shot(ls, o.obstacle, tol).epsilon
            two = certify_two_shot(ls, o.obstacle, tol).epsilon
            mc = mc_collision_probability(ls, o.obstacle, samples, seed).estimate
            rows.append([alpha, o.name, one, two, mc, _rel_err(one, mc), _rel_err(two, mc)])
    return rows


def bench_scene(n_links: int, n_obstacles: int, layout: str = "links") -> Scene:
    """Symmetric ring layouts.

    ``"links"``: a ring of links around one central cube (requires a single
    obstacle). ``"obstacles"``: a ring of cubes around a central column of
    stacked links.
    """
    if layout == "links":
        if n_obstacles != 1:
            raise ValueError("the link-ring layout has exactly one obstacle")
        return gen_ring_scene(Box([0.1, 0.1, 0.1]), n_links, BENCH_RING_RADIUS)
    if layout == "obstacles":
        return gen_obstacle_ring_scene(n_obstacles, BENCH_RING_RADIUS, n_links=n_links)
    raise ValueError(f"unknown layout {layout!r}")


def time_queries(scene: Scene, method: Method, tol: float, repeat: int) -> np.ndarray:
    """Wall time in seconds of each single-obstacle query, ``repeat`` rounds
    over all obstacles, shape ``(repeat, n_obstacles)``."""
    return time_interleaved([scene], method, [tol], repeat)[0][0]


def time_interleaved(scenes: Sequence[Scene], method: Method, tols: Sequence[float],
                     repeat: int) -> List[List[np.ndarray]]:
    """Per-query wall times for every (scene, tol) pair.

    Rounds are interleaved across configurations so slow drift in machine
    state (clock scaling, background load) hits all of them alike.
    Result ``[i][k]`` has shape ``(repeat, n_obstacles_i)``.
    """
    fn = _CERTIFIERS[method]
    jobs = []
    for scene in scenes:
        ls = LinkSet(scene.link_bodies())
        obstacles = [o.obstacle for o in scene.obstacles]
        for tol in tols:
            for ob in obstacles:
                fn(ls, ob, tol)  # warm-up (JIT and caches)
            jobs.append((ls, obstacles, tol, np.empty((repeat, len(obstacles)))))
    clock = time.perf_counter
    for r in range(repeat):
        for ls, obstacles, tol, out in jobs:
            for j, ob in enumerate(obstacles):
                t0 = clock()
                fn(ls, ob, tol)
                out[r, j] = clock() - t0
    it = iter(job[3] for job in jobs)
    return [[next(it) for _ in tols] for _ in scenes]


def bench_rows(cfg: RunConfig) -> List[list]:
    repeat = cfg.repeat if cfg.repeat is not None else BENCH_REPEAT
    if cfg.scene is not None:
        scene = load_scene(cfg.scene)
        configs = [(scene, len(scene.links), len(scene.obstacles))]
    else:
        layout = "links" if cfg.obstacles == [1] else "obstacles"
        configs = [(bench_scene(l, o, layout), l, o) for l in cfg.links for o in cfg.obstacles]
    times = time_interleaved([c[0] for c in configs], cfg.method, cfg.tols, repeat)
    rows = []
    for (_, l, o), per_tol in zip(configs, times):
        for tol, t in zip(cfg.tols, per_tol):
            rows.append([l, o, tol, round(float(t.mean()) * 1e6, 3), cfg.method.value])
    return rows


def run(cfg: RunConfig) -> str:
    if cfg.command == "certify":
        return render(CERTIFY_COLUMNS, certify_rows(load_scene(cfg.scene), cfg.method, cfg.tol), cfg.csv)
    if cfg.command == "oracle":
        return render(ORACLE_COLUMNS, oracle_rows(load_scene(cfg.scene), cfg.samples, cfg.seed), cfg.csv)
    if cfg.command == "sweep":
        rows = sweep_rows(load_scene(cfg.scene), cfg.alphas, cfg.tol, cfg.samples, cfg.seed)
        return render(SWEEP_COLUMNS, rows, cfg.csv)
    return render(BENCH_COLUMNS, bench_rows(cfg), cfg.csv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        print(f"riskcert: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        text = run(cfg)
    except (SceneError, OSError) as exc:
        print(f"riskcert: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (CertificationError, OracleError, GJKError) as exc:
        print(f"riskcert: computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    if cfg.out:
        try:
            with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"riskcert: cannot write {cfg.out}: {exc}", file=sys.stderr)
            return EXIT_INPUT
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
