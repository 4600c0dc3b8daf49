"""A* over the belief grid with affordance cost, path-to-action bridging, and the
ground-truth shortest path used by SPL."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels as K
from .config import FORWARD_M, SUCCESS_RADIUS_M
from .mapping import OccupancyGrid
from .valuemaps import ValueField
from .world import Action, Pose, Scene, success_region

C_MIN = 0.05
ALIGN_TOL_DEG = 15.0
WAYPOINT_POP_M = 0.10


class NoPathError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Path:
    cells: np.ndarray  # (N, 2) (row, col), start first
    length_m: float
    cost: float

    def __len__(self) -> int:
        return len(self.cells)

    def waypoints(self, res: float, spacing: int = 1) -> list[tuple[float, float]]:
        """Cell centres, keeping every ``spacing``-th cell after the start plus the last."""
        idx = list(range(spacing, len(self.cells), spacing))
        if len(self.cells) > 1 and (not idx or idx[-1] != len(self.cells) - 1):
            idx.append(len(self.cells) - 1)
        return [((self.cells[i, 1] + 0.5) * res, (self.cells[i, 0] + 0.5) * res) for i in idx]


def cell_costs(aff: ValueField, c_min: float = C_MIN) -> np.ndarray:
    return np.maximum(1.0 - aff.values, c_min)


def path_length(cells: np.ndarray, res: float) -> float:
    if len(cells) < 2:
        return 0.0
    d = np.abs(np.diff(cells, axis=0))
    diag = int(np.count_nonzero(d.sum(axis=1) == 2))
    orth = len(d) - diag
    return orth * res + diag * res * math.sqrt(2.0)


def plan(grid: OccupancyGrid, aff: ValueField, start: tuple[int, int], target: tuple[int, int],
         c_min: float = C_MIN, passable: np.ndarray | None = None) -> Path:
    """Cost-optimal 8-connected path; entering cell x costs ``max(1 - A(x), c_min) * step``.

    ``passable`` defaults to the believed-free cells.  Raises NoPathError when the
    target cannot be reached in the belief.
    """
    if passable is None:
        passable = grid.free
    passable = passable.copy()
    passable[start] = True
    if not passable[target]:
        raise NoPathError(f"target {target} is not navigable")
    rows, cols, cost = K.astar(passable, cell_costs(aff, c_min), start[0], start[1],
                               target[0], target[1], grid.resolution_m, c_min)
    if len(rows) == 0:
        raise NoPathError(f"no path {start} -> {target}")
    cells = np.column_stack([rows, cols])
    return Path(cells, path_length(cells, grid.resolution_m), float(cost))


def inflated_passable(grid: OccupancyGrid, inflate_m: float) -> np.ndarray:
    """Believed-free cells farther than ``inflate_m`` from any believed obstacle."""
    free = grid.free
    if inflate_m <= 0:
        return free
    occ = grid.occupied
    if not occ.any():
        return free
    d2 = K.edt_sq(occ)
    return free & (d2 > (inflate_m / grid.resolution_m) ** 2 + 1e-9)


def _bearing_delta(pose: Pose, x: float, y: float) -> float:
    bearing = math.degrees(math.atan2(y - pose.y, x - pose.x))
    return (bearing - pose.heading_deg + 180.0) % 360.0 - 180.0


def turn_toward(pose: Pose, x: float, y: float) -> Action:
    """Shorter rotation toward (x, y); an exact 180 degree bearing turns left."""
    delta = _bearing_delta(pose, x, y)
    if delta == -180.0 or delta > 0:
        return Action.TURN_LEFT
    return Action.TURN_RIGHT


def next_action(pose: Pose, waypoints: Sequence[tuple[float, float]]) -> tuple[Action, list[tuple[float, float]]]:
    """Drop waypoints within 0.10 m, then go forward if the next one lies within 15
    degrees of the heading, otherwise turn the short way.  Returns the action and the
    remaining waypoints; with none left the agent turns left in place.

    A waypoint straight ahead that one forward step cannot bring closer is also
    dropped; otherwise the agent would hop back and forth across it.
    """
    remaining = list(waypoints)
    rad = math.radians(pose.heading_deg)
    fx, fy = pose.x + FORWARD_M * math.cos(rad), pose.y + FORWARD_M * math.sin(rad)
    while remaining:
        x, y = remaining[0]
        d = math.hypot(x - pose.x, y - pose.y)
        if d <= WAYPOINT_POP_M or (abs(_bearing_delta(pose, x, y)) <= ALIGN_TOL_DEG
                                   and math.hypot(x - fx, y - fy) >= d):
            remaining.pop(0)
            continue
        break
    if not remaining:
        return Action.TURN_LEFT, remaining
    x, y = remaining[0]
    if abs(_bearing_delta(pose, x, y)) <= ALIGN_TOL_DEG:
        return Action.FORWARD, remaining
    return turn_toward(pose, x, y), remaining


def shortest_path_length(scene: Scene, start: Pose | None = None, goal_category: str | None = None,
                         radius: float = SUCCESS_RADIUS_M) -> float:
    """Geodesic 8-connected distance over ground-truth free cells from the start cell
    to the nearest success-region cell (within ``radius`` of a goal, in line of sight)."""
    if goal_category is not None and goal_category != scene.goal_category:
        scene = Scene(scene.occupied, scene.objects, scene.start_pose, goal_category,
                      scene.id, scene.resolution_m, scene.rooms)
    start = scene.start_pose if start is None else start
    region = success_region(scene, radius)
    sr, sc = start.cell(scene.resolution_m)
    if region[sr, sc]:
        return 0.0
    dist = K.dijkstra_lengths(~scene.occupied, sr, sc, scene.resolution_m)
    best = float(dist[region].min()) if region.any() else math.inf
    return best

