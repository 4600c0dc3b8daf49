#!/usr/bin/env python3
"""Run the two directional benchmarks and print their tables.

geometry: dwfe vs nearest/random frontier baselines on the default generator.
semantic: dwfe vs shf (co-occurrence stub) on scenes whose goals live in one room type.
"""

import argparse
import dataclasses
import json
import os
import time

from objnav_bench.config import BenchConfig
from objnav_bench.harness import run_suite
from objnav_bench.vocab import STRUCTURED_GOALS
from objnav_bench.world import SceneParams, generate_scene


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--suite", choices=("geometry", "semantic", "both"), default="both")
    p.add_argument("--scenes", type=int, default=100)
    p.add_argument("--episodes", type=int, default=2, help="episodes per scene")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--episode-config", default="{}",
                   help='JSON overrides for the episode section, e.g. \'{"target_set": "navigable"}\'')
    p.add_argument("--out", help="directory for the .jsonl reports")
    args = p.parse_args()

    cfg = BenchConfig()
    cfg = dataclasses.replace(cfg, episode=dataclasses.replace(cfg.episode, **json.loads(args.episode_config)))
    suites = []
    if args.suite in ("geometry", "both"):
        scenes = [generate_scene(s) for s in range(args.scenes)]
        suites.append(("geometry", scenes, ["dwfe", "nearest", "random"]))
    if args.suite in ("semantic", "both"):
        params = SceneParams(goal_categories=STRUCTURED_GOALS)
        scenes = [generate_scene(10_000 + s, params) for s in range(args.scenes)]
        suites.append(("semantic", scenes, ["dwfe", "shf"]))

    for name, scenes, modes in suites:
        t = time.perf_counter()
        rep = run_suite(scenes, modes, episodes_per_scene=args.episodes, seed=args.seed,
                        jobs=args.jobs, config=cfg)
        print(f"## {name} ({time.perf_counter() - t:.0f}s)\n")
        print(rep.to_markdown())
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            rep.save(os.path.join(args.out, f"{name}.jsonl"))


if __name__ == "__main__":
    main()
