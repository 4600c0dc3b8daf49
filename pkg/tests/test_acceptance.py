"""Acceptance checks, one per headline criterion.

Each test records a one-line verdict that is printed in the terminal summary
(and by ``python tests/test_acceptance.py``).  The two directional benchmarks
run full 200-episode suites and take a few minutes each on one core.
"""

import dataclasses
import math
import os
import sys
import time

import numpy as np
import pytest
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from objnav_bench.harness import EpisodeResult, compute_spl, compute_success, run_episode, run_suite
from objnav_bench.islands import FrontierIsland, cluster
from objnav_bench.language import ConstantOracle, RandomOracle, tally_votes
from objnav_bench.mapping import FREE, OCCUPIED, UNKNOWN, FrontierSet, OccupancyGrid, extract_frontiers
from objnav_bench.planner import NoPathError, cell_costs, plan
from objnav_bench.valuemaps import ValueField, dwfe_scores, shf_inject
from objnav_bench.vocab import STRUCTURED_GOALS
from objnav_bench.world import Pose, SceneParams, episode_scene, generate_scene, sense

VERDICTS: list[str] = []

RES = 0.05
A_STAR_TOL = 1e-9          # float summation order differs between the two searches
BENCH_SCENES = 100
BENCH_EPISODES = 2         # per scene: 200 episodes per mode
BENCH_BUDGET_S = 600.0
JOBS = min(8, os.cpu_count() or 1)


def record(name: str, ok: bool, detail: str) -> None:
    VERDICTS.append(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


# ---------------------------------------------------------------- oracles

def brute_frontiers(cells):
    h, w = cells.shape
    out = set()
    for r in range(h):
        for c in range(w):
            if cells[r, c] != FREE:
                continue
            if any(0 <= r + dr < h and 0 <= c + dc < w and cells[r + dr, c + dc] == UNKNOWN
                   for dr in (-1, 0, 1) for dc in (-1, 0, 1) if dr or dc):
                out.add((r, c))
    return out


def union_find_groups(cells, eps_cells):
    n = len(cells)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    diff = cells[:, None, :] - cells[None, :, :]
    close = (diff ** 2).sum(-1) <= eps_cells ** 2
    for i, j in np.argwhere(np.triu(close, 1)):
        parent[find(int(i))] = find(int(j))
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), set()).add(tuple(cells[i].tolist()))
    return {frozenset(g) for g in groups.values()}


def dijkstra_cost(passable, cost, start, target):
    h, w = passable.shape
    rows, cols, vals = [], [], []
    for r in range(h):
        for c in range(w):
            if not passable[r, c]:
                continue
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    nr, nc = r + dr, c + dc
                    if not (dr or dc) or not (0 <= nr < h and 0 <= nc < w) or not passable[nr, nc]:
                        continue
                    if dr and dc and not (passable[nr, c] and passable[r, nc]):
                        continue
                    rows.append(r * w + c)
                    cols.append(nr * w + nc)
                    vals.append(cost[nr, nc] * RES * (math.sqrt(2) if dr and dc else 1.0))
    graph = coo_matrix((vals, (rows, cols)), shape=(h * w, h * w)).tocsr()
    return dijkstra(graph, indices=start[0] * w + start[1])[target[0] * w + target[1]]


def recheck_success(scene_by_id, row) -> bool:
    """Re-evaluate the success predicate at the final pose against ground truth."""
    base_id, ep = row["scene_id"].rsplit("/ep", 1)
    scene = episode_scene(scene_by_id[base_id], row["seed"], int(ep))
    x, y, h = row["trajectory"][-1]
    obs = sense(scene, Pose(x, y, h))
    return any(s.category == scene.goal_category and s.range_m <= 0.25 for s in obs.visible_objects)


# ---------------------------------------------------------------- property criteria

def test_frontier_oracle_equivalence():
    rng = np.random.default_rng(0)
    mismatches, elapsed = 0, 0.0
    for _ in range(1000):
        p = rng.dirichlet([1, 1, 1])
        cells = rng.choice(np.array([UNKNOWN, FREE, OCCUPIED], np.int8), size=(32, 32), p=p)
        t = time.perf_counter()
        got = extract_frontiers(OccupancyGrid(cells, RES)).as_set()
        elapsed += time.perf_counter() - t
        mismatches += got != brute_frontiers(cells)
    ok = mismatches == 0 and elapsed < 5.0
    record("frontier oracle", ok, f"{mismatches} mismatches over 1000 grids, {elapsed:.3f}s")
    assert ok


def test_dbscan_equivalence():
    rng = np.random.default_rng(1)
    eps = 1.0
    mismatches = 0
    for _ in range(500):
        n = int(rng.integers(0, 201))
        side = int(rng.integers(20, 400))
        pts = np.unique(rng.integers(0, side, size=(n, 2)), axis=0).astype(np.int64).reshape(-1, 2)
        islands = cluster(FrontierSet(pts, RES), eps=eps, min_samples=1)
        got = {isl.cell_set() for isl in islands}
        mismatches += got != union_find_groups(pts, eps / RES)
    record("DBSCAN equivalence", mismatches == 0, f"{mismatches} mismatches over 500 point sets")
    assert mismatches == 0


def test_dwfe_hand_grid():
    grid = OccupancyGrid(np.full((5, 5), FREE, np.int8), RES)
    isl = FrontierIsland(0, np.array([[0, 0], [0, 1]]), (0.05, 0.025))
    field = dwfe_scores(grid, [isl]).values
    hand = np.empty((5, 5))
    for r in range(5):
        for c in range(5):
            hand[r, c] = min(math.hypot(r - 0, c - 0), math.hypot(r - 0, c - 1))
    expect = 1.0 - hand / hand.max()
    err = float(np.abs(field - expect).max())
    ok = err <= 1e-9 and field[0, 0] == field[0, 1] == 1.0 and field[4, 4] == 0.0
    record("DWFE hand grid", ok, f"max error {err:.1e}, island={field[0, 0]}, farthest={field[4, 4]}")
    assert ok


def test_vote_tally_and_injection():
    a = FrontierIsland(0, np.array([[1, 1], [1, 2]]), (0.1, 0.075), ("sink",))
    b = FrontierIsland(1, np.array([[6, 6]]), (0.325, 0.325), ("sofa",))
    tally = tally_votes(ConstantOracle(0, 1), "microwave", [a, b], k=5)
    avm = ValueField(np.random.default_rng(2).random((8, 8)))
    eta = 0.7
    delta = shf_inject(avm, [a, b], tally.h, eta=eta).values - avm.values
    on_a = delta[a.cells[:, 0], a.cells[:, 1]]
    on_b = delta[b.cells[:, 0], b.cells[:, 1]]
    mask = np.ones((8, 8), bool)
    mask[a.cells[:, 0], a.cells[:, 1]] = mask[b.cells[:, 0], b.cells[:, 1]] = False
    ok = (tally.h == {0: 5, 1: -5} and np.allclose(on_a, eta, atol=1e-12, rtol=0)
          and not on_b.any() and not delta[mask].any())
    record("vote tally / injection", ok, f"h={tally.h}, added A={on_a.tolist()}, B={on_b.tolist()}")
    assert ok


def test_astar_matches_dijkstra():
    rng = np.random.default_rng(3)
    worst, mismatches = 0.0, 0
    for _ in range(200):
        cells = np.where(rng.random((20, 20)) < 0.2, OCCUPIED, FREE).astype(np.int8)
        free = np.argwhere(cells == FREE)
        s, t = map(lambda p: (int(p[0]), int(p[1])), free[rng.choice(len(free), 2)])
        grid = OccupancyGrid(cells, RES)
        aff = ValueField(rng.random((20, 20)))
        ref = dijkstra_cost(grid.free, cell_costs(aff), s, t)
        try:
            got = plan(grid, aff, s, t).cost
        except NoPathError:
            got = math.inf
        if math.isinf(ref) or math.isinf(got):
            mismatches += math.isinf(ref) != math.isinf(got)
        else:
            worst = max(worst, abs(got - ref))
    ok = mismatches == 0 and worst <= A_STAR_TOL
    record("A* vs Dijkstra", ok, f"{mismatches} reachability mismatches, max |diff| {worst:.1e} "
           f"(tol {A_STAR_TOL:g})")
    assert ok


def test_spl_formula():
    def res(success, length, shortest):
        return EpisodeResult("s", "dwfe", success, 1, length, shortest, [(0.0, 0.0, 0)])

    got = (compute_spl([res(True, 3.0, 3.0)]), compute_spl([res(False, 3.0, 3.0)]),
           compute_spl([res(True, 6.0, 3.0), res(False, 1.0, 3.0)]))
    rng = np.random.default_rng(4)
    bound_ok = True
    for _ in range(500):
        rows = [res(bool(rng.integers(2)), float(rng.uniform(0, 20)), float(rng.uniform(0, 20)))
                for _ in range(int(rng.integers(1, 30)))]
        bound_ok &= compute_spl(rows) <= compute_success(rows) + 1e-12
    ok = got == (100.0, 0.0, 25.0) and bound_ok
    record("SPL formula", ok, f"examples {got}, SPL<=Success on 500 random suites: {bound_ok}")
    assert ok


def test_end_to_end_determinism():
    scenes = [generate_scene(s) for s in range(10)]
    runs = {}
    for jobs in (1, 8):
        for rep in range(2):
            runs[(jobs, rep)] = run_suite(scenes, ["dwfe"], episodes_per_scene=2, seed=11,
                                          jobs=jobs).row_lines()
    ref = runs[(1, 0)]
    same = all(r == ref for r in runs.values())
    ok = same and len(ref) == 20
    record("end-to-end determinism", ok, f"{len(ref)} rows, 4 runs (jobs 1 and 8) identical: {same}")
    assert ok


# ---------------------------------------------------------------- directional benchmarks

@pytest.fixture(scope="module")
def geometry_suite():
    scenes = [generate_scene(s) for s in range(BENCH_SCENES)]
    t = time.perf_counter()
    rep = run_suite(scenes, ["dwfe", "nearest", "random"], episodes_per_scene=BENCH_EPISODES,
                    seed=0, jobs=JOBS)
    return scenes, rep, time.perf_counter() - t


@pytest.fixture(scope="module")
def structured_suite():
    params = SceneParams(goal_categories=STRUCTURED_GOALS)
    scenes = [generate_scene(10_000 + s, params) for s in range(BENCH_SCENES)]
    rep = run_suite(scenes, ["dwfe", "shf"], episodes_per_scene=BENCH_EPISODES, seed=0, jobs=JOBS)
    return scenes, rep


@pytest.mark.slow
def test_dwfe_beats_baselines(geometry_suite):
    _, rep, elapsed = geometry_suite
    agg = rep.aggregates
    dwfe = agg["dwfe"]["spl_pct"]
    near = agg["nearest_frontier_baseline"]["spl_pct"]
    rand = agg["random_frontier_baseline"]["spl_pct"]
    ok = dwfe > near and dwfe > rand and elapsed < BENCH_BUDGET_S
    record("DWFE vs baselines", ok,
           f"SPL dwfe {dwfe:.2f}, nearest {near:.2f} ({dwfe - near:+.2f}), random {rand:.2f} "
           f"({dwfe - rand:+.2f}); {agg['dwfe']['episodes']} episodes/mode in {elapsed:.0f}s")
    assert ok


@pytest.mark.slow
def test_shf_not_worse_than_dwfe(structured_suite):
    _, rep = structured_suite
    d, s = rep.aggregates["dwfe"], rep.aggregates["shf"]
    ok = s["success_pct"] >= d["success_pct"] and s["avg_steps"] <= d["avg_steps"]
    record("SHF vs DWFE (structured)", ok,
           f"Success {s['success_pct']:.1f} vs {d['success_pct']:.1f} "
           f"({s['success_pct'] - d['success_pct']:+.1f}), steps {s['avg_steps']:.1f} vs "
           f"{d['avg_steps']:.1f} ({s['avg_steps'] - d['avg_steps']:+.1f}), "
           f"SPL {s['spl_pct']:.1f} vs {d['spl_pct']:.1f}")
    assert ok


@pytest.mark.slow
def test_timeout_and_success_rules(geometry_suite, structured_suite):
    rng = np.random.default_rng(5)
    fuzz_rows = []
    fuzz_scenes = {}
    for i in range(30):
        seed = int(rng.integers(0, 1_000_000))
        params = SceneParams(goal_categories=STRUCTURED_GOALS) if i % 2 else SceneParams()
        base = generate_scene(seed, params)
        fuzz_scenes[base.id] = base
        mode = ["dwfe", "nearest", "random", "shf"][i % 4]
        oracle = RandomOracle(seed) if mode == "shf" else None
        ep = int(rng.integers(0, 3))
        try:
            scene = episode_scene(base, seed, ep)
        except Exception:
            continue
        fuzz_rows.append(run_episode(scene, mode, oracle, seed=seed).to_row())

    checked, over, bad = 0, 0, 0
    sources = [(fuzz_scenes, fuzz_rows),
               ({s.id: s for s in geometry_suite[0]}, geometry_suite[1].rows),
               ({s.id: s for s in structured_suite[0]}, structured_suite[1].rows)]
    for scenes, rows in sources:
        for row in rows:
            checked += 1
            over += row["steps"] > 500
            if row["success"] and not recheck_success(scenes, row):
                bad += 1
    ok = over == 0 and bad == 0
    record("timeout / success rules", ok,
           f"{checked} episodes ({len(fuzz_rows)} fuzzed), {over} over 500 steps, "
           f"{bad} successes failing the re-check")
    assert ok


if __name__ == "__main__":
    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider"] + sys.argv[1:])
    sys.exit(int(code))
