"""Belief occupancy grid built from ray fans, plus frontier extraction."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels as K
from .config import RESOLUTION_M
from .world import Observation, Pose, Scene

UNKNOWN, FREE, OCCUPIED = 0, 1, 2


@dataclass(eq=False)
class OccupancyGrid:
    cells: np.ndarray  # int8 codes UNKNOWN/FREE/OCCUPIED
    resolution_m: float = RESOLUTION_M
    origin: tuple[float, float] = (0.0, 0.0)

    @classmethod
    def unknown(cls, shape: tuple[int, int], resolution_m: float = RESOLUTION_M) -> "OccupancyGrid":
        return cls(np.zeros(shape, dtype=np.int8), resolution_m)

    @classmethod
    def shadowing(cls, scene: Scene) -> "OccupancyGrid":
        return cls.unknown(scene.shape, scene.resolution_m)

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    @property
    def free(self) -> np.ndarray:
        return self.cells == FREE

    @property
    def occupied(self) -> np.ndarray:
        return self.cells == OCCUPIED

    @property
    def unknown_mask(self) -> np.ndarray:
        return self.cells == UNKNOWN

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.cells.copy(), self.resolution_m, self.origin)

    def cell_center(self, r, c):
        res = self.resolution_m
        return self.origin[0] + (np.asarray(c) + 0.5) * res, self.origin[1] + (np.asarray(r) + 0.5) * res

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        res = self.resolution_m
        return int(np.floor((y - self.origin[1]) / res)), int(np.floor((x - self.origin[0]) / res))

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (np.array_equal(self.cells, other.cells) and self.resolution_m == other.resolution_m
                and self.origin == other.origin)


def ray_evidence(shape, pose: Pose, obs: Observation, res: float) -> tuple[np.ndarray, np.ndarray]:
    """Boolean (free, occupied) masks justified by one observation."""
    free = np.zeros(shape, dtype=bool)
    occ = np.zeros(shape, dtype=bool)
    K.ray_marks(shape[0], shape[1], pose.x, pose.y, obs.angles + pose.heading,
                obs.ranges, obs.hits, res, free, occ)
    return free, occ


def integrate(grid: OccupancyGrid, pose: Pose, obs: Observation, inplace: bool = False) -> OccupancyGrid:
    """Fold one observation into the belief.

    Cells strictly before a hit become free, the hit cell becomes occupied; within
    one call occupied wins over free, across calls the latest evidence wins.  Known
    cells never return to unknown.
    """
    out = grid if inplace else grid.copy()
    free, occ = ray_evidence(out.shape, pose, obs, out.resolution_m)
    out.cells[free] = FREE
    out.cells[occ] = OCCUPIED
    return out


@dataclass(frozen=True, eq=False)
class FrontierSet:
    cells: np.ndarray  # (N, 2) int64 rows of (row, col), lexicographically sorted
    resolution_m: float = RESOLUTION_M
    origin: tuple[float, float] = (0.0, 0.0)

    def __len__(self) -> int:
        return len(self.cells)

    def as_set(self) -> set[tuple[int, int]]:
        return {(int(r), int(c)) for r, c in self.cells}

    def centers(self) -> np.ndarray:
        res = self.resolution_m
        return np.column_stack([self.origin[0] + (self.cells[:, 1] + 0.5) * res,
                                self.origin[1] + (self.cells[:, 0] + 0.5) * res])


def frontier_mask(cells: np.ndarray) -> np.ndarray:
    unknown = np.pad(cells == UNKNOWN, 1, constant_values=False)
    h, w = cells.shape
    near = np.zeros((h, w), dtype=bool)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr or dc:
                near |= unknown[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]
    return (cells == FREE) & near


def extract_frontiers(grid: OccupancyGrid) -> FrontierSet:
    """Free cells with at least one unknown 8-neighbour (cells off the grid are not unknown)."""
    cells = np.argwhere(frontier_mask(grid.cells)).astype(np.int64)
    return FrontierSet(cells.reshape(-1, 2), grid.resolution_m, grid.origin)


def write_pgm(values: np.ndarray, path: str | Path, levels: dict[int, int] | None = None) -> None:
    """Plain-text graymap (P2), first line of pixels is the top of the map (max row).

    Belief grids map unknown=128, free=255, occupied=0.  Real-valued fields are
    rescaled linearly to 0..255.
    """
    if levels is None and values.dtype.kind in "iub":
        levels = {UNKNOWN: 128, FREE: 255, OCCUPIED: 0}
    if levels is not None:
        img = np.zeros(values.shape, dtype=int)
        for code, gray in levels.items():
            img[values == code] = gray
    else:
        v = values.astype(float)
        lo, hi = float(v.min()), float(v.max())
        img = np.full(v.shape, 128, dtype=int) if hi == lo else np.rint((v - lo) / (hi - lo) * 255).astype(int)
    img = img[::-1]
    h, w = img.shape
    lines = ["P2", f"{w} {h}", "255"]
    lines += [" ".join(map(str, row)) for row in img.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")
