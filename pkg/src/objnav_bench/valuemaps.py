"""Action Value Map scoring (distance-weighted frontiers, vote injection), affordance
composition and target selection."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import ndimage

from . import _kernels as K
from .islands import FrontierIsland
from .mapping import OccupancyGrid


class ContractViolation(ValueError):
    """A caller broke an operation's precondition."""


class SelectorMode(str, enum.Enum):
    DWFE = "dwfe"
    SHF = "shf"
    NEAREST = "nearest_frontier_baseline"
    RANDOM = "random_frontier_baseline"
    GOAL_DIRECTED = "goal_directed"


@dataclass(eq=False)
class ValueField:
    values: np.ndarray
    kind: str = "avm"  # avm | trajectory | affordance | cost

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def min_max(values: np.ndarray) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return np.full(values.shape, 0.5)
    return (values - lo) / (hi - lo)


def contribution_stack(grid: OccupancyGrid, islands: Sequence[FrontierIsland]) -> np.ndarray:
    """Per-island score ``1 - d(x, f) / d_max`` on navigable cells, 0 elsewhere, as an
    (islands, H, W) array.

    ``d(x, f)`` is the straight-line distance from cell x to the nearest member of f;
    ``d_max`` is its maximum over the navigable cells at this step.
    """
    nav = grid.free
    if not nav.any() or not islands:
        return np.zeros((len(islands),) + grid.shape)
    cells = np.concatenate([isl.cells for isl in islands]).astype(np.int64)
    starts = np.cumsum([0] + [len(isl.cells) for isl in islands]).astype(np.int64)
    return K.island_scores(np.ascontiguousarray(cells[:, 0]), np.ascontiguousarray(cells[:, 1]),
                           starts, nav)


def island_contributions(grid: OccupancyGrid, islands: Sequence[FrontierIsland]) -> list[np.ndarray]:
    return list(contribution_stack(grid, islands))


def dwfe_scores(grid: OccupancyGrid, islands: Sequence[FrontierIsland], aggregate: str = "sum") -> ValueField:
    """Distance-weighted frontier field: island contributions summed (or max-ed) per cell."""
    if aggregate not in ("sum", "max"):
        raise ContractViolation(f"unknown aggregate {aggregate!r}")
    stack = contribution_stack(grid, islands)
    if len(stack) == 0:
        return ValueField(np.zeros(grid.shape), "avm")
    field = stack.sum(axis=0) if aggregate == "sum" else stack.max(axis=0)
    return ValueField(field, "avm")


def normalize_votes(h: Mapping[int, float]) -> dict[int, float]:
    ids = sorted(h)
    vals = np.array([h[i] for i in ids], dtype=float)
    if len(vals) == 0:
        return {}
    norm = min_max(vals)
    return {i: float(v) for i, v in zip(ids, norm)}


def shf_inject(avm: ValueField, islands: Sequence[FrontierIsland], h: Mapping[int, float],
               eta: float = 1.0) -> ValueField:
    """Add ``eta * normalised(h[f])`` to every cell of island f; other cells are untouched."""
    ids = {isl.id for isl in islands}
    stray = set(h) - ids
    if stray:
        raise ContractViolation(f"votes for unknown islands {sorted(stray)}")
    missing = ids - set(h)
    if missing:
        raise ContractViolation(f"no votes for islands {sorted(missing)}")
    hat = normalize_votes(h)
    values = avm.values.copy()
    for isl in islands:
        values[isl.cells[:, 0], isl.cells[:, 1]] += eta * hat[isl.id]
    return ValueField(values, avm.kind)


def trajectory_field(shape, trajectory_xy: Iterable[tuple[float, float]], res: float,
                     radius_m: float = 0.3, lam: float = 0.1) -> ValueField:
    """Revisit penalty: ``-lam`` on cells within ``radius_m`` of the executed path."""
    visited = np.zeros(shape, dtype=bool)
    for x, y in trajectory_xy:
        r, c = int(np.floor(y / res)), int(np.floor(x / res))
        if 0 <= r < shape[0] and 0 <= c < shape[1]:
            visited[r, c] = True
    if not visited.any():
        return ValueField(np.zeros(shape), "trajectory")
    d = ndimage.distance_transform_edt(~visited) * res
    return ValueField(np.where(d <= radius_m, -lam, 0.0), "trajectory")


def compose_affordance(fields: Sequence[ValueField]) -> ValueField:
    """Element-wise sum of aligned fields, min-max normalised to [0, 1]."""
    if not fields:
        raise ContractViolation("no fields to compose")
    shape = fields[0].shape
    total = np.zeros(shape)
    for f in fields:
        if f.shape != shape:
            raise ContractViolation(f"field shape {f.shape} != {shape}")
        total += f.values
    return ValueField(min_max(total), "affordance")


def select_target(aff: ValueField, grid: OccupancyGrid, allowed: np.ndarray | None = None) -> tuple[int, int]:
    """Navigable cell with the largest affordance; ties go to the smallest row-major index.

    ``allowed`` optionally narrows the navigable set further.
    """
    nav = grid.free if allowed is None else grid.free & allowed
    if not nav.any():
        raise ContractViolation("no navigable cells")
    scores = np.where(nav, aff.values, -np.inf)
    flat = int(np.argmax(scores))
    return divmod(flat, grid.shape[1])


def goal_directed_target(sightings: Sequence[tuple[float, float]], res: float,
                         origin: tuple[float, float] = (0.0, 0.0)) -> tuple[int, int]:
    """Cell containing the centroid of the goal sightings (x, y in metres)."""
    if len(sightings) == 0:
        raise ContractViolation("goal-directed target requested before any goal sighting")
    pts = np.asarray(sightings, dtype=float)
    cx, cy = pts.mean(axis=0)
    return int(np.floor((cy - origin[1]) / res)), int(np.floor((cx - origin[0]) / res))
