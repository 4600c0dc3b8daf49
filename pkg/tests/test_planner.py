import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from conftest import box_scene
from objnav_bench.mapping import FREE, OCCUPIED, OccupancyGrid
from objnav_bench.planner import (C_MIN, NoPathError, cell_costs, inflated_passable, next_action, plan,
                                  shortest_path_length)
from objnav_bench.valuemaps import ValueField
from objnav_bench.world import Action, Pose, Scene, step

RES = 0.05
MOVES = [(0, 1), (0, -1), (1, 0), (-1, 0), (1, 1), (1, -1), (-1, 1), (-1, -1)]


def moves_from(passable, r, c):
    h, w = passable.shape
    for dr, dc in MOVES:
        nr, nc = r + dr, c + dc
        if not (0 <= nr < h and 0 <= nc < w) or not passable[nr, nc]:
            continue
        if dr and dc and not (passable[nr, c] and passable[r, nc]):
            continue
        yield nr, nc, RES * (math.sqrt(2) if dr and dc else 1.0)


def dijkstra_cost(passable, cost, start, target):
    h, w = passable.shape
    rows, cols, vals = [], [], []
    for r in range(h):
        for c in range(w):
            if passable[r, c] or (r, c) == start:
                for nr, nc, step_len in moves_from(passable, r, c):
                    rows.append(r * w + c)
                    cols.append(nr * w + nc)
                    vals.append(cost[nr, nc] * step_len)
    graph = csr_matrix((vals, (rows, cols)), shape=(h * w, h * w))
    d = dijkstra(graph, indices=start[0] * w + start[1])
    return d[target[0] * w + target[1]]


def exhaustive_best(passable, cost, start, target):
    """Cheapest simple path by depth-first enumeration.

    Branches are cut once their cost plus an admissible remainder (octile
    distance at the cheapest cell cost) reaches the best path found so far.
    """
    best = [math.inf]
    seen = {start}
    floor = float(cost.min()) * RES

    def remainder(r, c):
        dr, dc = abs(r - target[0]), abs(c - target[1])
        return floor * (max(dr, dc) - min(dr, dc) + math.sqrt(2) * min(dr, dc))

    def dfs(r, c, acc):
        if acc + remainder(r, c) >= best[0] * (1 + 1e-12):
            return
        if (r, c) == target:
            best[0] = acc
            return
        for nr, nc, step_len in moves_from(passable, r, c):
            if (nr, nc) not in seen:
                seen.add((nr, nc))
                dfs(nr, nc, acc + cost[nr, nc] * step_len)
                seen.discard((nr, nc))

    dfs(*start, 0.0)
    return best[0]


def bellman_ford(passable, cost, start, target):
    """Relax every edge until nothing changes; no priority queue involved."""
    h, w = passable.shape
    dist = np.full((h, w), math.inf)
    dist[start] = 0.0
    changed = True
    while changed:
        changed = False
        for r in range(h):
            for c in range(w):
                if math.isinf(dist[r, c]):
                    continue
                for nr, nc, step_len in moves_from(passable, r, c):
                    d = dist[r, c] + cost[nr, nc] * step_len
                    if d < dist[nr, nc] - 1e-15:
                        dist[nr, nc] = d
                        changed = True
    return dist[target]


def free_grid(h, w):
    return OccupancyGrid(np.full((h, w), FREE, dtype=np.int8), RES)


def test_uniform_affordance_gives_octile_length():
    g = free_grid(20, 20)
    path = plan(g, ValueField(np.zeros((20, 20))), (2, 3), (12, 17))
    assert path.length_m == pytest.approx((10 * math.sqrt(2) + 4) * RES)
    assert tuple(path.cells[0]) == (2, 3) and tuple(path.cells[-1]) == (12, 17)
    steps = np.abs(np.diff(path.cells, axis=0))
    assert steps.max() == 1 and (steps.sum(axis=1) >= 1).all()


def test_routes_around_costly_branch_matches_exhaustive():
    cells = np.full((6, 6), FREE, dtype=np.int8)
    cells[2:4, 1:5] = OCCUPIED  # wall splits two branches
    g = OccupancyGrid(cells, RES)
    aff = np.full((6, 6), 0.5)
    aff[0:2, :] = 0.0  # upper branch costly
    aff[4:6, :] = 1.0  # lower branch cheap
    path = plan(g, ValueField(aff), (2, 0), (2, 5))
    assert all(r >= 4 or c in (0, 5) for r, c in path.cells.tolist())
    expect = exhaustive_best(g.free, cell_costs(ValueField(aff)), (2, 0), (2, 5))
    assert path.cost == pytest.approx(expect, abs=1e-12)


@given(st.integers(0, 10_000))
def test_small_grid_matches_bellman_ford(seed):
    rng = np.random.default_rng(seed)
    cells = np.where(rng.random((6, 6)) < 0.25, OCCUPIED, FREE).astype(np.int8)
    cells[0, 0] = cells[5, 5] = FREE
    g = OccupancyGrid(cells, RES)
    aff = ValueField(rng.random((6, 6)))
    best = bellman_ford(g.free, cell_costs(aff), (0, 0), (5, 5))
    if math.isinf(best):
        with pytest.raises(NoPathError):
            plan(g, aff, (0, 0), (5, 5))
    else:
        assert plan(g, aff, (0, 0), (5, 5)).cost == pytest.approx(best, abs=1e-12)


def test_walled_off_target():
    cells = np.full((10, 10), FREE, dtype=np.int8)
    cells[:, 5] = OCCUPIED
    with pytest.raises(NoPathError):
        plan(OccupancyGrid(cells, RES), ValueField(np.zeros((10, 10))), (0, 0), (0, 9))
    with pytest.raises(NoPathError):
        plan(OccupancyGrid(cells, RES), ValueField(np.zeros((10, 10))), (0, 0), (0, 5))


def test_no_corner_cutting():
    cells = np.full((3, 3), FREE, dtype=np.int8)
    cells[0, 1] = OCCUPIED
    path = plan(OccupancyGrid(cells, RES), ValueField(np.zeros((3, 3))), (0, 0), (1, 1))
    assert len(path) == 3  # must step down then right


@given(st.integers(0, 10_000))
def test_astar_matches_dijkstra(seed):
    rng = np.random.default_rng(seed)
    cells = np.where(rng.random((20, 20)) < 0.2, OCCUPIED, FREE).astype(np.int8)
    free = np.argwhere(cells == FREE)
    s, t = free[rng.integers(len(free))], free[rng.integers(len(free))]
    s, t = (int(s[0]), int(s[1])), (int(t[0]), int(t[1]))
    g = OccupancyGrid(cells, RES)
    aff = ValueField(rng.random((20, 20)))
    ref = dijkstra_cost(g.free, cell_costs(aff), s, t)
    if math.isinf(ref):
        with pytest.raises(NoPathError):
            plan(g, aff, s, t)
    else:
        assert abs(plan(g, aff, s, t).cost - ref) <= 1e-9


def test_cost_floor():
    assert cell_costs(ValueField(np.array([[1.0, 0.2]]))).tolist() == [[C_MIN, 0.8]]


def test_inflation_removes_cells_near_walls():
    cells = np.full((10, 10), FREE, dtype=np.int8)
    cells[5, 5] = OCCUPIED
    pas = inflated_passable(OccupancyGrid(cells, RES), 0.10)
    assert not pas[5, 7] and not pas[6, 6] and pas[5, 8] and pas[7, 7]
    assert inflated_passable(OccupancyGrid(cells, RES), 0.0).sum() == 99


# ---------------------------------------------------------------- next_action

def test_next_action_examples():
    p = Pose(1.0, 1.0, 0)
    assert next_action(p, [(2.0, 1.0)])[0] is Action.FORWARD
    assert next_action(p, [(1.0, 2.0)])[0] is Action.TURN_LEFT
    assert next_action(p, [(1.0, 0.0)])[0] is Action.TURN_RIGHT
    assert next_action(p, [(0.0, 1.0)])[0] is Action.TURN_LEFT  # exact 180
    assert next_action(p, [(2.0, 1.0 + math.tan(math.radians(14)))])[0] is Action.FORWARD


def test_waypoints_within_pop_radius_are_dropped():
    action, rest = next_action(Pose(1.0, 1.0, 0), [(1.05, 1.0), (1.0, 2.0)])
    assert rest == [(1.0, 2.0)] and action is Action.TURN_LEFT
    action, rest = next_action(Pose(1.0, 1.0, 0), [(1.05, 1.0)])
    assert rest == []


def test_no_hopping_across_a_waypoint_just_out_of_reach():
    # 0.1 m behind with a 0.5 mm side offset: a forward step lands just as far away
    pose = Pose(0.688, 1.0, 270)
    action, rest = next_action(pose, [(0.6875, 0.9)])
    assert rest == []
    action, rest = next_action(pose, [(0.6875, 0.9), (0.6875, 0.3)])
    assert action is Action.FORWARD and rest == [(0.6875, 0.3)]


@given(st.floats(0.6, 2.4), st.floats(0.6, 1.4), st.integers(0, 11), st.floats(0.6, 2.4), st.floats(0.6, 1.4))
def test_action_convergence(x, y, h, wx, wy):
    scene = box_scene()
    pose = Pose(round(x, 3), round(y, 3), h * 30)
    wp = [(wx, wy)]
    dists = [math.hypot(wx - pose.x, wy - pose.y)]
    for _ in range(80):
        action, wp = next_action(pose, wp)
        if not wp:
            break
        pose = step(scene, pose, action)
        dists.append(math.hypot(wx - pose.x, wy - pose.y))
    assert not wp, "waypoint never reached"
    window = 7  # a half turn takes six 30 degree turns
    for i in range(len(dists) - window):
        assert min(dists[i + 1:i + window + 1]) < dists[i]


# ---------------------------------------------------------------- ground-truth shortest path

def test_shortest_path_straight_corridor():
    scene = box_scene(h=10, w=100, objects=[("chair", 4.025, 0.225)], start=Pose(1.025, 0.225, 0))
    assert shortest_path_length(scene) == pytest.approx(2.75, abs=1e-9)


def test_shortest_path_l_shape():
    # horizontal leg along row 4, vertical leg up column 44
    scene = box_scene(h=50, w=50, objects=[("chair", 2.225, 2.025)], start=Pose(0.225, 0.225, 0))
    occ = np.ones(scene.shape, bool)
    occ[4, 4:45] = False
    occ[4:41, 44] = False
    scene = Scene(occ, scene.objects, scene.start_pose, "chair", "L", RES)
    expect = (44 - 4) * RES + (40 - 4) * RES - 0.25
    assert shortest_path_length(scene) == pytest.approx(expect, abs=1e-9)


def test_shortest_path_zero_inside_region():
    scene = box_scene(objects=[("chair", 1.1, 1.0)], start=Pose(1.0, 1.0, 0))
    assert shortest_path_length(scene) == 0.0
