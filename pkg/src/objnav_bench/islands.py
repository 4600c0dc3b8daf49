"""Frontier islands: DBSCAN over frontier cell centres, plus enclosed-object name lists.

At ``min_samples=1`` every point is a core point, so DBSCAN reduces to connected
components of the eps-neighbourhood graph and nothing is labelled noise.  The
general rule is kept for other settings (border points join the cluster of their
lowest-indexed core neighbour, noise points are dropped).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from ._kernels import union_components
from .config import RESOLUTION_M
from .mapping import FrontierSet

# cell-centre distances equal to eps count as neighbours
EPS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class FrontierIsland:
    id: int
    cells: np.ndarray  # (N, 2) (row, col), lexicographic
    centroid: tuple[float, float]  # metres (x, y)
    names: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.cells)

    def cell_set(self) -> frozenset[tuple[int, int]]:
        return frozenset((int(r), int(c)) for r, c in self.cells)


def _neighbour_pairs(points: np.ndarray, radius: float) -> np.ndarray:
    tree = cKDTree(points)
    return tree.query_pairs(radius + EPS_TOL, output_type="ndarray")


def dbscan_labels(points: np.ndarray, eps: float, min_samples: int) -> np.ndarray:
    """Cluster labels 0..K-1 (in no particular order), -1 for noise."""
    n = len(points)
    if n == 0:
        return np.empty(0, dtype=np.int64)
    pairs = _neighbour_pairs(points, eps)
    counts = np.ones(n, dtype=np.int64)
    np.add.at(counts, pairs[:, 0], 1)
    np.add.at(counts, pairs[:, 1], 1)
    core = counts >= min_samples
    both = core[pairs[:, 0]] & core[pairs[:, 1]] if len(pairs) else np.zeros(0, bool)
    cp = pairs[both]
    comp = union_components(n, np.ascontiguousarray(cp, dtype=np.int64).reshape(-1, 2))
    labels = np.where(core, comp, -1)
    if not core.all():
        border = np.full(n, n, dtype=np.int64)
        for a, b in pairs:
            if core[a] and not core[b]:
                border[b] = min(border[b], a)
            if core[b] and not core[a]:
                border[a] = min(border[a], b)
        for i in np.nonzero(~core & (border < n))[0]:
            labels[i] = comp[border[i]]
    return labels


def cluster(frontiers: FrontierSet, eps: float = 1.0, min_samples: int = 1) -> list[FrontierIsland]:
    """Group frontier cells into islands with ids ordered by each island's smallest cell."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if min_samples < 1:
        raise ValueError("min_samples must be >= 1")
    cells = np.asarray(frontiers.cells, dtype=np.int64).reshape(-1, 2)
    if len(cells) == 0:
        return []
    order = np.lexsort((cells[:, 1], cells[:, 0]))
    cells = cells[order]
    # distances in cell units keep the eps comparison exact for grid points
    labels = dbscan_labels(cells.astype(float), eps / frontiers.resolution_m, min_samples)
    res = frontiers.resolution_m
    ox, oy = frontiers.origin
    groups: dict[int, list[int]] = {}
    for i, lab in enumerate(labels.tolist()):
        if lab >= 0:
            groups.setdefault(lab, []).append(i)
    # cells are sorted, so each group's first index is its smallest cell
    ordered = sorted(groups.values(), key=lambda idx: idx[0])
    islands = []
    for k, idx in enumerate(ordered):
        member = cells[idx]
        cx = ox + float(np.mean(member[:, 1] + 0.5)) * res
        cy = oy + float(np.mean(member[:, 0] + 0.5)) * res
        islands.append(FrontierIsland(k, member, (cx, cy)))
    return islands


def attach_names(islands: list[FrontierIsland], sightings, radius: float = 2.0,
                 resolution_m: float = RESOLUTION_M, origin: tuple[float, float] = (0.0, 0.0),
                 ) -> list[FrontierIsland]:
    """Set each island's names to the sorted, de-duplicated categories sighted within
    ``radius`` of any of its member cell centres.  ``sightings`` is an iterable of
    ``(category, x, y)``."""
    sightings = list(sightings)
    if not sightings:
        return [replace(isl, names=()) for isl in islands]
    cats = [s[0] for s in sightings]
    pts = np.array([[s[1], s[2]] for s in sightings], dtype=float)
    out = []
    for isl in islands:
        centres = np.column_stack([origin[0] + (isl.cells[:, 1] + 0.5) * resolution_m,
                                   origin[1] + (isl.cells[:, 0] + 0.5) * resolution_m])
        tree = cKDTree(centres)
        d, _ = tree.query(pts, k=1)
        names = sorted({c for c, di in zip(cats, d) if di <= radius + EPS_TOL})
        out.append(replace(isl, names=tuple(names)))
    return out
