#!/usr/bin/env python3
"""Sweep the object-to-island attach radius and report SHF against DWFE.

Object names reach an island when the object sits within the attach radius of
one of its cells, so the radius controls how much the oracle gets to see.
"""

import argparse
import dataclasses
import os

from objnav_bench.config import BenchConfig
from objnav_bench.harness import run_suite
from objnav_bench.vocab import STRUCTURED_GOALS
from objnav_bench.world import SceneParams, generate_scene


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--radii", default="0.5,1.0,2.0,3.0")
    p.add_argument("--scenes", type=int, default=40)
    p.add_argument("--episodes", type=int, default=1)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    args = p.parse_args()

    params = SceneParams(goal_categories=STRUCTURED_GOALS)
    scenes = [generate_scene(10_000 + s, params) for s in range(args.scenes)]
    base = BenchConfig()
    dwfe = run_suite(scenes, ["dwfe"], args.episodes, jobs=args.jobs, config=base).aggregates["dwfe"]
    print("| attach radius (m) | SHF Success (%) | SHF SPL (%) | SHF Avg. Steps | dSteps vs DWFE |")
    print("|---|---|---|---|---|")
    for radius in (float(r) for r in args.radii.split(",")):
        cfg = dataclasses.replace(base, cluster=dataclasses.replace(base.cluster, attach_radius_m=radius))
        shf = run_suite(scenes, ["shf"], args.episodes, jobs=args.jobs, config=cfg).aggregates["shf"]
        print(f"| {radius:g} | {shf['success_pct']:.1f} | {shf['spl_pct']:.1f} | {shf['avg_steps']:.1f} "
              f"| {shf['avg_steps'] - dwfe['avg_steps']:+.1f} |")
    print(f"\nDWFE reference: {dwfe['success_pct']:.1f} / {dwfe['spl_pct']:.1f} / {dwfe['avg_steps']:.1f}")


if __name__ == "__main__":
    main()
