"""Standalone SVG of an episode: walls, trajectory, goal objects, final frontiers."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .harness import EpisodeResult
from .world import Scene

GOAL_COLOR = "purple"
FRONTIER_COLOR = "red"
CENTROID_COLOR = "yellow"
PATH_COLOR = "#1f77b4"
PX_PER_M = 60.0


def _wall_runs(occ: np.ndarray):
    for r, row in enumerate(occ):
        c = 0
        w = len(row)
        while c < w:
            if row[c]:
                start = c
                while c < w and row[c]:
                    c += 1
                yield r, start, c - start
            else:
                c += 1


def render_svg(result: EpisodeResult, scene: Scene, px_per_m: float = PX_PER_M) -> str:
    """Top-down view with +y pointing up the page."""
    if not result.trajectory:
        raise ValueError("empty trajectory")
    res = scene.resolution_m
    h, w = scene.shape
    s = px_per_m
    cell = res * s
    width, height = w * cell, h * cell

    def X(x):
        return f"{x * s:.2f}"

    def Y(y):
        return f"{height - y * s:.2f}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
           f'viewBox="0 0 {width:.2f} {height:.2f}">',
           f"<title>{escape(result.scene_id)} {escape(result.mode)} "
           f"{'success' if result.success else result.outcome}</title>",
           f'<rect x="0" y="0" width="{width:.2f}" height="{height:.2f}" fill="white"/>',
           '<g id="walls" fill="#444">']
    for r, c0, n in _wall_runs(scene.occupied):
        out.append(f'<rect x="{c0 * cell:.2f}" y="{height - (r + 1) * cell:.2f}" '
                   f'width="{n * cell:.2f}" height="{cell:.2f}"/>')
    out.append("</g>")

    out.append(f'<g id="goals" fill="{GOAL_COLOR}">')
    side = 0.2 * s
    for obj in scene.goal_objects():
        out.append(f'<rect class="goal" x="{obj.x * s - side / 2:.2f}" y="{height - obj.y * s - side / 2:.2f}" '
                   f'width="{side:.2f}" height="{side:.2f}"/>')
    out.append("</g>")

    out.append(f'<g id="frontiers" fill="{FRONTIER_COLOR}">')
    for r, c in result.final_frontiers:
        out.append(f'<circle cx="{X((c + 0.5) * res)}" cy="{Y((r + 0.5) * res)}" r="{0.02 * s:.2f}"/>')
    out.append("</g>")

    pts = " ".join(f"{X(x)},{Y(y)}" for x, y, _ in result.trajectory)
    out.append(f'<polyline id="trajectory" points="{pts}" fill="none" stroke="{PATH_COLOR}" '
               f'stroke-width="{0.03 * s:.2f}"/>')
    x0, y0, _ = result.trajectory[0]
    out.append(f'<circle id="start" cx="{X(x0)}" cy="{Y(y0)}" r="{0.06 * s:.2f}" fill="green"/>')

    out.append(f'<g id="centroids" fill="{CENTROID_COLOR}" stroke="black" stroke-width="0.5">')
    for x, y in result.final_centroids:
        out.append(f'<circle cx="{X(x)}" cy="{Y(y)}" r="{0.07 * s:.2f}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
