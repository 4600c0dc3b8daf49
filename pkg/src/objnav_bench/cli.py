"""Command line: gen-scenes, run, report, render."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .config import BenchConfig
from .harness import CLI_MODES, SuiteReport, run_suite
from .render import render_svg
from .vocab import STRUCTURED_GOALS
from .world import SceneFormatError, SceneParams, generate_scene, load_scene_dir, save_scene

log = logging.getLogger("objnav_bench")


def episode_id(row: dict) -> str:
    return f"{row['scene_id']}@{row['mode']}"


def cmd_gen_scenes(args) -> int:
    params = SceneParams()
    if args.structured:
        params = dataclasses.replace(params, goal_categories=STRUCTURED_GOALS)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(args.count):
        seed = args.seed + k
        scene = generate_scene(seed, params)
        save_scene(scene, out / f"{scene.id}.json")
    print(f"wrote {args.count} scenes to {out}")
    return 0


def _parse_modes(values: list[str]) -> list[str]:
    modes = []
    for v in values:
        for m in v.split(","):
            if m not in CLI_MODES:
                raise ValueError(f"unknown mode {m!r}; choose from {sorted(CLI_MODES)}")
            if m not in modes:
                modes.append(m)
    return modes


def cmd_run(args) -> int:
    cfg = BenchConfig.load(args.config) if args.config else BenchConfig()
    if args.oracle:
        cfg = dataclasses.replace(cfg, oracle=args.oracle)
    scenes = load_scene_dir(args.scenes)
    if args.limit:
        scenes = scenes[:args.limit]
    report = run_suite(scenes, _parse_modes(args.mode), episodes_per_scene=args.episodes,
                       seed=args.seed, jobs=args.jobs, config=cfg, dump_dir=args.dump_pgm)
    report.save(args.out)
    errors = sum(r["outcome"] == "error" for r in report.rows)
    sys.stdout.write(report.to_markdown())
    if errors:
        log.error("%d episode(s) ended with an internal error", errors)
        return 1
    return 0


def cmd_report(args) -> int:
    report = SuiteReport.load(args.inp)
    sys.stdout.write(report.to_csv() if args.format == "csv" else report.to_markdown())
    return 0


def cmd_render(args) -> int:
    report = SuiteReport.load(args.inp)
    rows = [r for r in report.rows if episode_id(r) == args.episode]
    if not rows:
        known = ", ".join(episode_id(r) for r in report.rows[:5])
        raise ValueError(f"no episode {args.episode!r} in {args.inp} (e.g. {known})")
    result = report.results()[report.rows.index(rows[0])]
    base_id = result.scene_id.split("/")[0]
    scenes = {s.id: s for s in load_scene_dir(args.scenes)}
    if base_id not in scenes:
        raise ValueError(f"scene {base_id!r} not found in {args.scenes}")
    Path(args.out).write_text(render_svg(result, scenes[base_id]))
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="objnav-bench", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-scenes", help="generate scene files")
    g.add_argument("--seed", type=int, default=0, help="seed of the first scene; scene k uses seed+k")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--structured", action="store_true",
                   help="draw goals from categories with strong room co-occurrence")
    g.set_defaults(func=cmd_gen_scenes)

    r = sub.add_parser("run", help="run a benchmark suite")
    r.add_argument("--scenes", required=True, help="directory of scene files")
    r.add_argument("--mode", action="append", required=True,
                   help="dwfe, shf, nearest or random; repeat or comma-separate for several")
    r.add_argument("--episodes", type=int, default=2, help="episodes per scene")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out", required=True, help="report path (.jsonl)")
    r.add_argument("--config", help="JSON config file")
    r.add_argument("--oracle", choices=("stub", "random", "llm"), help="vote oracle for shf")
    r.add_argument("--limit", type=int, help="use only the first N scenes")
    r.add_argument("--dump-pgm", metavar="DIR", help="write final belief and affordance maps as PGM")
    r.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="print a results table")
    rep.add_argument("--in", dest="inp", required=True)
    rep.add_argument("--format", choices=("csv", "md"), default="md")
    rep.set_defaults(func=cmd_report)

    rn = sub.add_parser("render", help="draw one episode as SVG")
    rn.add_argument("--episode", required=True, help="episode id, '<scene_id>@<mode>'")
    rn.add_argument("--in", dest="inp", default="report.jsonl")
    rn.add_argument("--scenes", default="scenes")
    rn.add_argument("--out", required=True)
    rn.set_defaults(func=cmd_render)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, SceneFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
