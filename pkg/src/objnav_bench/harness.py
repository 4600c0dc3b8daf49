"""Episode loop, baselines, Success/SPL metrics and seeded benchmark suites."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from . import __version__
from . import _kernels as K
from .config import BenchConfig
from .islands import FrontierIsland, attach_names, cluster
from .language import (OracleTransportError, RandomOracle, VoteOracle, cooccurrence_stub,
                       llm_client, tally_votes)
from .mapping import OccupancyGrid, extract_frontiers, integrate, write_pgm
from .planner import NoPathError, inflated_passable, next_action, plan, shortest_path_length, turn_toward
from .valuemaps import (ContractViolation, SelectorMode, ValueField, compose_affordance, dwfe_scores,
                        goal_directed_target, select_target, shf_inject, trajectory_field)
from .world import (Action, Pose, Scene, episode_scene, goal_reached, sense, sighting_position,
                    step)

log = logging.getLogger(__name__)

CLI_MODES = {"dwfe": SelectorMode.DWFE, "shf": SelectorMode.SHF,
             "nearest": SelectorMode.NEAREST, "random": SelectorMode.RANDOM}


@dataclass
class EpisodeResult:
    scene_id: str
    mode: str
    success: bool
    steps: int
    path_length_m: float
    shortest_m: float
    trajectory: list[tuple[float, float, int]]
    abstentions: int = 0
    seed: int = 0
    outcome: str = "timeout"  # success | wrong_stop | timeout | error
    error: str | None = None
    oracle_errors: int = 0
    goal_seen_step: int | None = None
    final_frontiers: list[tuple[int, int]] = field(default_factory=list)
    final_centroids: list[tuple[float, float]] = field(default_factory=list)

    @property
    def spl_term(self) -> float:
        if not self.success:
            return 0.0
        denom = max(self.shortest_m, self.path_length_m)
        return 1.0 if denom == 0 else self.shortest_m / denom

    def to_row(self) -> dict:
        row = asdict(self)
        row["trajectory"] = [list(p) for p in self.trajectory]
        row["final_frontiers"] = [list(p) for p in self.final_frontiers]
        row["final_centroids"] = [list(p) for p in self.final_centroids]
        return row

    @classmethod
    def from_row(cls, row: dict) -> "EpisodeResult":
        data = dict(row)
        data["trajectory"] = [tuple(p) for p in data["trajectory"]]
        data["final_frontiers"] = [tuple(p) for p in data.get("final_frontiers", [])]
        data["final_centroids"] = [tuple(p) for p in data.get("final_centroids", [])]
        return cls(**data)


# ---------------------------------------------------------------- metrics

def compute_success(results: Sequence[EpisodeResult]) -> float:
    if not results:
        raise ContractViolation("no episodes")
    return 100.0 * sum(r.success for r in results) / len(results)


def compute_spl(results: Sequence[EpisodeResult]) -> float:
    """SPL in percent: mean of S_i * l*_i / max(l*_i, l_i)."""
    if not results:
        raise ContractViolation("no episodes")
    return 100.0 * sum(r.spl_term for r in results) / len(results)


def average_steps(results: Sequence[EpisodeResult]) -> float:
    if not results:
        raise ContractViolation("no episodes")
    return sum(r.steps for r in results) / len(results)


# ---------------------------------------------------------------- baselines

def _representative(isl: FrontierIsland, allowed: np.ndarray, res: float) -> tuple[int, int] | None:
    """Allowed member cell closest to the island centroid (first in cell order on ties)."""
    ok = allowed[isl.cells[:, 0], isl.cells[:, 1]]
    if not ok.any():
        return None
    cells = isl.cells[ok]
    cx, cy = isl.centroid
    d = np.hypot((cells[:, 1] + 0.5) * res - cx, (cells[:, 0] + 0.5) * res - cy)
    r, c = cells[int(np.argmin(d))]
    return int(r), int(c)


def baseline_agent(kind: str):
    """Return ``select(islands, allowed, reach, res, rng) -> cell | None``.

    ``nearest_frontier`` takes the island whose representative cell is geodesically
    closest (``reach`` holds geodesic distances from the agent); ``random_frontier``
    draws an island uniformly from ``rng``.  Both return None when nothing is left.
    """
    if kind in ("nearest", "nearest_frontier", SelectorMode.NEAREST):
        def select(islands, allowed, reach, res, rng):
            best, best_d = None, math.inf
            for isl in islands:
                rep = _representative(isl, allowed, res)
                if rep is not None and reach[rep] < best_d:
                    best, best_d = rep, reach[rep]
            return best
    elif kind in ("random", "random_frontier", SelectorMode.RANDOM):
        def select(islands, allowed, reach, res, rng):
            reps = [rep for isl in islands
                    if (rep := _representative(isl, allowed, res)) is not None]
            if not reps:
                return None
            return reps[int(rng.integers(len(reps)))]
    else:
        raise ContractViolation(f"unknown baseline {kind!r}")
    return select


# ---------------------------------------------------------------- episode

def _reachable(passable: np.ndarray, start: tuple[int, int]) -> np.ndarray:
    # a diagonal move needs both orthogonal neighbours, so 4-connectivity gives the same set
    labels, _ = ndimage.label(passable)
    if not passable[start]:
        return np.zeros(passable.shape, dtype=bool)
    return labels == labels[start]


def _disk(shape, center: tuple[int, int], radius_cells: float) -> np.ndarray:
    r0, c0 = center
    rr, cc = np.ogrid[:shape[0], :shape[1]]
    return (rr - r0) ** 2 + (cc - c0) ** 2 <= radius_cells ** 2


class _Episode:
    """Mutable per-episode state; one instance per ``run_episode`` call."""

    def __init__(self, scene: Scene, mode: SelectorMode, oracle, seed: int, cfg: BenchConfig):
        self.scene = scene
        self.mode = mode
        self.oracle = oracle
        self.cfg = cfg
        self.res = scene.resolution_m
        self.rng = np.random.default_rng(seed)
        self.grid = OccupancyGrid.shadowing(scene)
        self.bumped = np.zeros(scene.shape, dtype=bool)
        self.blacklist = np.zeros(scene.shape, dtype=bool)
        self.sightings: dict[tuple[str, int, int], tuple[str, float, float]] = {}
        self.goal_points: list[tuple[float, float]] = []
        self.goal_mode = False
        self.target: tuple[int, int] | None = None
        self.committed: tuple[int, int] | None = None
        self.unknown = int(self.grid.unknown_mask.sum())
        self.stall = 0
        self.abstentions = 0
        self.oracle_errors = 0
        self.vote_memo: dict = {}
        self.path_xy: list[tuple[float, float]] = []
        self.last_aff: ValueField | None = None
        self.select_baseline = (baseline_agent(mode) if mode in (SelectorMode.NEAREST, SelectorMode.RANDOM)
                                else None)

    # -- helpers
    def passable(self, pose: Pose) -> np.ndarray:
        belief = self.grid
        if self.bumped.any():
            belief = belief.copy()
            belief.cells[self.bumped & ~belief.free] = 2
        pas = inflated_passable(belief, self.cfg.planner.inflate_m) & ~self.bumped
        pas[pose.cell(self.res)] = True
        return pas

    def observe(self, pose: Pose):
        obs = sense(self.scene, pose, self.cfg.sensor)
        integrate(self.grid, pose, obs, inplace=True)
        for s in obs.visible_objects:
            x, y = sighting_position(pose, s)
            key = (s.category, math.floor(y / self.res), math.floor(x / self.res))
            self.sightings.setdefault(key, (s.category, x, y))
            if s.category == self.scene.goal_category:
                self.goal_points.append((x, y))
                self.goal_mode = True
        unknown = int(self.grid.unknown_mask.sum())
        self.stall = 0 if unknown < self.unknown else self.stall + 1
        self.unknown = unknown
        return obs

    def drive(self, pose: Pose, passable: np.ndarray, aff: ValueField, target: tuple[int, int],
              extra: tuple[float, float] | None = None) -> Action:
        self.last_aff = aff
        path = plan(self.grid, aff, pose.cell(self.res), target, self.cfg.planner.c_min, passable)
        wps = path.waypoints(self.res, self.cfg.planner.waypoint_spacing_cells)
        if extra is not None:
            wps.append(extra)
        action, _ = next_action(pose, wps)
        return action

    # -- policies
    def goal_action(self, pose: Pose) -> Action:
        gx, gy = np.mean(np.asarray(self.goal_points), axis=0)
        if math.hypot(gx - pose.x, gy - pose.y) <= self.cfg.episode.success_radius_m:
            return turn_toward(pose, gx, gy)
        target = goal_directed_target(self.goal_points, self.res)
        passable = self.passable(pose)
        ok = _reachable(passable, pose.cell(self.res))
        if not ok[target]:
            rows, cols = np.nonzero(ok)
            d = (rows - target[0]) ** 2 + (cols - target[1]) ** 2
            k = int(np.argmin(d))
            target = (int(rows[k]), int(cols[k]))
        aff = ValueField(np.zeros(self.scene.shape), "affordance")
        return self.drive(pose, passable, aff, target, extra=(float(gx), float(gy)))

    def scoring_fields(self, islands: list[FrontierIsland]) -> list[ValueField]:
        ep = self.cfg.episode
        avm = dwfe_scores(self.grid, islands, ep.dwfe_aggregate)
        if self.mode is SelectorMode.SHF:
            named = attach_names(islands, self.sightings.values(), self.cfg.cluster.attach_radius_m,
                                 self.res)
            key = (self.scene.goal_category, tuple(isl.names for isl in named))
            try:
                if ep.memoize_votes and key in self.vote_memo:
                    h = self.vote_memo[key]
                else:
                    tally = tally_votes(self.oracle, self.scene.goal_category, named, ep.k_votes,
                                        concurrent=getattr(self.oracle, "concurrent", False))
                    self.abstentions += tally.abstentions
                    h = tally.h
                    self.vote_memo[key] = h
                avm = shf_inject(avm, named, h, ep.eta)
            except OracleTransportError as exc:
                self.oracle_errors += 1
                log.warning("vote oracle failed, scoring with geometry only: %s", exc)
        fields = [avm]
        if ep.trajectory_penalty:
            fields.append(trajectory_field(self.scene.shape, self.path_xy, self.res,
                                           ep.trajectory_radius_m, ep.trajectory_lambda))
        return fields

    def explore_action(self, pose: Pose) -> Action:
        ep = self.cfg.episode
        frontiers = extract_frontiers(self.grid)
        islands = cluster(frontiers, self.cfg.cluster.eps_m, self.cfg.cluster.min_samples)
        if not islands:
            return Action.TURN_LEFT  # map complete, hold position
        passable = self.passable(pose)
        here = pose.cell(self.res)
        if self.mode is SelectorMode.NEAREST:
            reach = K.dijkstra_lengths(passable, here[0], here[1], self.res)
            reachable = np.isfinite(reach)
        else:
            reach = None
            reachable = _reachable(passable, here)
        if self.target is not None and self.stall >= ep.stall_steps:
            self.blacklist |= _disk(self.scene.shape, self.target, ep.blacklist_radius_m / self.res)
            self.stall = 0
            self.committed = None
        allowed = reachable & ~self.blacklist
        if not allowed.any():
            self.blacklist[:] = False
            allowed = reachable
        arrive = ep.arrive_radius_m / self.res
        frontier_now = np.zeros(self.scene.shape, dtype=bool)
        frontier_now[frontiers.cells[:, 0], frontiers.cells[:, 1]] = True
        if not (frontier_now & reachable).any():
            return Action.TURN_LEFT  # only unreachable frontiers left: treat the map as complete
        if ep.target_set == "frontier":
            allowed &= frontier_now
        if self.select_baseline is None:
            aff = compose_affordance(self.scoring_fields(islands))
        for _ in range(32):
            if self.select_baseline is None:
                if not (allowed & self.grid.free).any():
                    return Action.TURN_LEFT
                target = select_target(aff, self.grid, allowed)
            else:
                target = self.committed if self.mode is SelectorMode.RANDOM else None
                if target is not None and not (allowed[target] and frontier_now[target]):
                    target = None
                if target is None:
                    target = self.select_baseline(islands, allowed, reach, self.res, self.rng)
                if target is None:
                    return Action.TURN_LEFT
                self.committed = target
                aff = ValueField(np.zeros(self.scene.shape), "affordance")
                aff.values[target] = 1.0
                aff = compose_affordance([aff])
            if math.hypot(target[0] - here[0], target[1] - here[1]) <= arrive:
                disk = _disk(self.scene.shape, target, ep.blacklist_radius_m / self.res)
                self.blacklist |= disk
                allowed &= ~disk
                self.committed = None
                continue
            self.target = target
            try:
                return self.drive(pose, passable, aff, target)
            except NoPathError:
                allowed[target] = False
        return Action.TURN_LEFT


def run_episode(scene: Scene, mode: SelectorMode | str, oracle: VoteOracle | None = None, seed: int = 0,
                max_steps: int | None = None, config: BenchConfig | None = None,
                dump_dir: str | Path | None = None) -> EpisodeResult:
    """Run one ObjectNav episode and record its outcome.

    With ``dump_dir`` the final belief grid and the last affordance map are
    written there as PGM images for debugging.
    """
    cfg = config or BenchConfig()
    mode = SelectorMode(CLI_MODES.get(mode, mode))
    if mode is SelectorMode.GOAL_DIRECTED:
        raise ContractViolation("goal_directed is entered by the episode, not requested")
    if (mode is SelectorMode.SHF) != (oracle is not None):
        raise ContractViolation("an oracle is required for shf and only for shf")
    max_steps = cfg.episode.max_steps if max_steps is None else max_steps
    ep = _Episode(scene, mode, oracle, seed, cfg)
    pose = scene.start_pose
    trajectory = [pose.as_tuple()]
    steps, length = 0, 0.0
    success, outcome, error = False, "timeout", None
    goal_seen = None
    try:
        while steps < max_steps:
            obs = ep.observe(pose)
            if ep.goal_mode and goal_seen is None:
                goal_seen = steps
            if ep.goal_mode:
                action = Action.STOP if goal_reached(scene, pose, obs, cfg.episode.success_radius_m) \
                    else ep.goal_action(pose)
            else:
                action = ep.explore_action(pose)
            new = step(scene, pose, action)
            steps += 1
            if action is Action.FORWARD:
                if new == pose:
                    _mark_bump(ep, pose)
                else:
                    length += math.hypot(new.x - pose.x, new.y - pose.y)
                    ep.path_xy.append((new.x, new.y))
            pose = new
            trajectory.append(pose.as_tuple())
            if action is Action.STOP:
                success = goal_reached(scene, pose, sense(scene, pose, cfg.sensor), cfg.episode.success_radius_m)
                outcome = "success" if success else "wrong_stop"
                break
    except (ContractViolation, NoPathError) as exc:
        outcome, error = "error", f"{type(exc).__name__}: {exc}"
        log.error("episode %s aborted: %s", scene.id, error)
    if dump_dir is not None:
        _dump_pgm(ep, Path(dump_dir), mode)
    frontiers = extract_frontiers(ep.grid)
    islands = cluster(frontiers, cfg.cluster.eps_m, cfg.cluster.min_samples)
    return EpisodeResult(
        scene_id=scene.id, mode=mode.value, success=success, steps=steps,
        path_length_m=round(length, 9), shortest_m=round(shortest_path_length(scene), 9),
        trajectory=trajectory, abstentions=ep.abstentions, seed=int(seed), outcome=outcome,
        error=error, oracle_errors=ep.oracle_errors, goal_seen_step=goal_seen,
        final_frontiers=[(int(r), int(c)) for r, c in frontiers.cells],
        final_centroids=[(round(i.centroid[0], 9), round(i.centroid[1], 9)) for i in islands],
    )


def _dump_pgm(ep: _Episode, out: Path, mode: SelectorMode) -> None:
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{ep.scene.id.replace('/', '_')}_{mode.value}"
    write_pgm(ep.grid.cells, out / f"{stem}_belief.pgm")
    if ep.last_aff is not None:
        write_pgm(ep.last_aff.values, out / f"{stem}_affordance.pgm")


def _mark_bump(ep: _Episode, pose: Pose) -> None:
    """A blocked forward move: the swept cells that are not believed free hold the wall."""
    res = ep.res
    h, w = ep.scene.shape
    cap = 32
    rows, cols = np.empty(cap, np.int64), np.empty(cap, np.int64)
    t_in, t_out = np.empty(cap), np.empty(cap)
    n = K.traverse(pose.x, pose.y, pose.heading, res, h, w, 0.2 + 1e-9, rows, cols, t_in, t_out)
    for r, c in zip(rows[:n], cols[:n]):
        if not ep.grid.free[r, c]:
            ep.bumped[r, c] = True


# ---------------------------------------------------------------- suites

def make_oracle(cfg: BenchConfig, seed: int, transcript: str | Path | None = None) -> VoteOracle:
    if cfg.oracle == "stub":
        return cooccurrence_stub()
    if cfg.oracle == "random":
        return RandomOracle(seed)
    if cfg.oracle == "llm":
        return llm_client(cfg.llm, transcript)
    raise ValueError(f"unknown oracle {cfg.oracle!r}")


def episode_seed(suite_seed: int, scene_index: int, episode_index: int) -> int:
    return int(np.random.SeedSequence([suite_seed, scene_index, episode_index]).generate_state(1)[0])


_WORKER: dict = {}


def _init_worker(scenes, cfg, dump_dir=None):
    _WORKER["scenes"] = scenes
    _WORKER["cfg"] = cfg
    _WORKER["dump_dir"] = dump_dir


def _run_item(item) -> dict:
    si, ei, mode, seed = item
    scenes, cfg = _WORKER["scenes"], _WORKER["cfg"]
    mode = SelectorMode(mode)
    try:
        scene = episode_scene(scenes[si], seed, ei)
    except Exception as exc:  # generation problems are recorded per episode
        return EpisodeResult(f"{scenes[si].id}/ep{ei}", mode.value, False, 0, 0.0, 0.0, [], seed=seed,
                             outcome="error", error=f"{type(exc).__name__}: {exc}").to_row()
    oracle = None
    if mode is SelectorMode.SHF:
        transcript = None
        if cfg.llm.transcript_dir:
            Path(cfg.llm.transcript_dir).mkdir(parents=True, exist_ok=True)
            transcript = Path(cfg.llm.transcript_dir) / f"{scene.id.replace('/', '_')}.jsonl"
        oracle = make_oracle(cfg, seed, transcript)
    result = run_episode(scene, mode, oracle, seed, config=cfg, dump_dir=_WORKER.get("dump_dir"))
    return result.to_row()


@dataclass
class SuiteReport:
    rows: list[dict]
    aggregates: dict[str, dict[str, float]]
    config_fingerprint: str = ""
    version: str = __version__

    @staticmethod
    def aggregate(rows: Sequence[dict]) -> dict[str, dict[str, float]]:
        by_mode: dict[str, list[EpisodeResult]] = {}
        for row in rows:
            by_mode.setdefault(row["mode"], []).append(EpisodeResult.from_row(row))
        return {mode: {"episodes": len(res), "success_pct": compute_success(res),
                       "spl_pct": compute_spl(res), "avg_steps": average_steps(res)}
                for mode, res in sorted(by_mode.items())}

    @classmethod
    def from_rows(cls, rows: Sequence[dict], fingerprint: str = "") -> "SuiteReport":
        rows = sorted(rows, key=_row_key)
        return cls(list(rows), cls.aggregate(rows), fingerprint)

    def results(self, mode: str | None = None) -> list[EpisodeResult]:
        return [EpisodeResult.from_row(r) for r in self.rows if mode is None or r["mode"] == mode]

    def row_lines(self) -> list[str]:
        return [json.dumps(r, sort_keys=True) for r in self.rows]

    def summary(self) -> dict:
        return {"aggregates": self.aggregates, "config_fingerprint": self.config_fingerprint,
                "version": self.version, "episodes": len(self.rows)}

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.write_text("\n".join(self.row_lines()) + "\n")
        summary_path(path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SuiteReport":
        """Read rows; when a summary document sits beside them, its aggregates must match."""
        path = Path(path)
        rows = [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
        fp, version = "", __version__
        sp = summary_path(path)
        report = cls.from_rows(rows)
        if sp.exists():
            summary = json.loads(sp.read_text())
            fp, version = summary.get("config_fingerprint", ""), summary.get("version", version)
            for mode, agg in summary["aggregates"].items():
                got = report.aggregates.get(mode)
                if got is None or any(not math.isclose(got[k], v, rel_tol=0, abs_tol=1e-9)
                                      for k, v in agg.items()):
                    raise ValueError(f"summary aggregates for {mode} do not match the rows")
        report.config_fingerprint, report.version = fp, version
        return report

    def to_csv(self) -> str:
        lines = ["mode,episodes,success_pct,spl_pct,avg_steps"]
        for mode, a in self.aggregates.items():
            lines.append(f"{mode},{a['episodes']},{a['success_pct']:.2f},{a['spl_pct']:.2f},{a['avg_steps']:.2f}")
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        lines = ["| Mode | Episodes | Success (%) | SPL (%) | Avg. Steps |", "|---|---|---|---|---|"]
        for mode, a in self.aggregates.items():
            lines.append(f"| {mode} | {a['episodes']} | {a['success_pct']:.1f} | {a['spl_pct']:.1f} "
                         f"| {a['avg_steps']:.1f} |")
        return "\n".join(lines) + "\n"


def summary_path(path: Path) -> Path:
    return path.with_name(path.stem + ".summary.json")


def _row_key(row: dict):
    return (row["scene_id"], row["mode"], row["seed"])


def run_suite(scenes: Sequence[Scene], modes: Sequence[SelectorMode | str], episodes_per_scene: int = 2,
              seed: int = 0, jobs: int = 1, config: BenchConfig | None = None,
              dump_dir: str | Path | None = None) -> SuiteReport:
    """Run every (scene, episode, mode) triple; rows are independent of ``jobs`` and order."""
    cfg = config or BenchConfig()
    if not modes:
        raise ValueError("no modes requested")
    modes = [SelectorMode(CLI_MODES.get(m, m)) for m in modes]
    items = [(si, ei, m.value, episode_seed(seed, si, ei))
             for si in range(len(scenes)) for ei in range(episodes_per_scene) for m in modes]
    if jobs <= 1:
        _init_worker(list(scenes), cfg, dump_dir)
        rows = [_run_item(it) for it in items]
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                                 initargs=(list(scenes), cfg, dump_dir)) as pool:
            rows = list(pool.map(_run_item, items, chunksize=max(1, len(items) // (4 * jobs))))
    return SuiteReport.from_rows(rows, cfg.fingerprint())
