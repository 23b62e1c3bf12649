"""Containment geometry and movement heatmaps.

Containment asks whether the evader sits inside the convex hull of the
pursuers (computed with the monotone chain); the hull area comes from the
shoelace formula and membership from orientation tests against every hull
edge, boundary inclusive. Heatmaps accumulate pursuer visits over episode
logs onto a grid covering the arena.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .world import WORLD_MAX, WORLD_MIN

ORIENTATION_TOL = 1e-12


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points):
    """Monotone-chain hull, counter-clockwise, no duplicate endpoint."""
    pts = sorted({(float(x), float(y)) for x, y in np.asarray(points)})
    if len(pts) <= 2:
        return [np.array(p) for p in pts]
    lower = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return [np.array(p) for p in lower[:-1] + upper[:-1]]


def polygon_area(vertices):
    """Shoelace area of a simple polygon given in order."""
    if len(vertices) < 3:
        return 0.0
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return float(0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def containment(pursuer_positions, evader_position):
    """(inside, hull_area) of the evader w.r.t. the pursuers' convex hull.

    Fewer than three pursuers, or a collinear team, is a degenerate hull:
    reported as (False, 0.0). A point on the hull boundary counts as inside.
    """
    positions = np.atleast_2d(np.asarray(pursuer_positions, dtype=float))
    hull = convex_hull(positions)
    area = polygon_area(hull)
    if len(hull) < 3 or area <= ORIENTATION_TOL:
        return False, 0.0
    point = np.asarray(evader_position, dtype=float)
    for k in range(len(hull)):
        if _cross(hull[k], hull[(k + 1) % len(hull)], point) < -ORIENTATION_TOL:
            return False, area
    return True, area


@dataclass
class Heatmap:
    """Raw visit counts and max-normalised density on an arena grid."""

    counts: np.ndarray
    resolution: int

    @property
    def density(self):
        peak = self.counts.max()
        if peak <= 0:
            return np.zeros_like(self.counts, dtype=float)
        return self.counts / peak

    def to_csv(self, path):
        np.savetxt(path, self.density, delimiter=",", fmt="%.6f")

    def to_pgm(self, path, levels=255):
        """Plain-text PGM image of the density (brighter = more visits)."""
        gray = np.rint(self.density * levels).astype(int)
        with open(path, "w") as fh:
            fh.write(f"P2\n{self.resolution} {self.resolution}\n{levels}\n")
            # image rows run top to bottom: flip the y axis
            for j in range(self.resolution - 1, -1, -1):
                fh.write(" ".join(str(gray[i, j])
                                  for i in range(self.resolution)) + "\n")


def heatmap_accumulate(logs, resolution=64):
    """Count pursuer visits per grid cell across all steps of all logs.

    ``counts[i, j]`` covers the cell with x in the i-th and y in the j-th of
    ``resolution`` equal bins over the arena.
    """
    if resolution < 8:
        raise ValueError("heatmap resolution must be at least 8")
    if not logs:
        raise ValueError("no episode logs given")
    counts = np.zeros((resolution, resolution), dtype=int)
    width = (WORLD_MAX - WORLD_MIN) / resolution
    for log in logs:
        positions = log.pursuer_positions()
        idx = np.floor((positions - WORLD_MIN) / width).astype(int)
        idx = np.clip(idx, 0, resolution - 1)
        for i, j in idx:
            counts[i, j] += 1
    return Heatmap(counts=counts, resolution=resolution)
