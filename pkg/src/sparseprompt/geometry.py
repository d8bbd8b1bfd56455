"""Point-set geometry: convex hulls, boundary pruning, grid sparsification.

Matched points tend to blanket the object and over-prompt the segmenter.
Two reducers fix that: ``prune_boundary`` drops the convex-hull vertices
(the most outlier-prone points), and ``sparsify`` keeps one point per
grid cell, the one nearest the global centroid.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .core import EmptyPointSetError, Point, PointSet, Space
from .pngio import atomic_write_bytes

__all__ = [
    "Hull",
    "GridSpec",
    "DEFAULT_MIN_KEEP",
    "convex_hull",
    "prune_boundary",
    "global_centroid",
    "sparsify",
    "save_points",
    "load_points",
]

DEFAULT_MIN_KEEP = 1


@dataclass(frozen=True, eq=False)
class Hull:
    """Convex hull vertices in counter-clockwise order (x right, y up).

    ``source_count`` records how many points the hull was built from.
    """

    vertices: np.ndarray
    source_count: int

    def __post_init__(self) -> None:
        a = np.asarray(self.vertices, dtype=np.float64)
        if a.ndim != 2 or a.shape[1] != 2 or a.shape[0] < 1:
            raise ValueError(f"hull vertices must be (V>=1, 2), got shape {a.shape}")
        if self.source_count < a.shape[0]:
            raise ValueError("source_count cannot be smaller than the vertex count")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "vertices", a)

    def vertex_set(self) -> set[tuple[float, float]]:
        return {(float(x), float(y)) for x, y in self.vertices}


@dataclass(frozen=True)
class GridSpec:
    """Sparsification grid: ``density`` cells per axis over an ``h x w`` extent."""

    density: int
    h: int
    w: int

    def __post_init__(self) -> None:
        if self.density < 1:
            raise ValueError(f"density must be >= 1, got {self.density}")
        if self.h < 1 or self.w < 1:
            raise ValueError("grid extent must be positive")

    @classmethod
    def for_space(cls, space: Space, density: int) -> "GridSpec":
        return cls(density=density, h=space.h, w=space.w)

    @property
    def cell_h(self) -> float:
        return self.h / self.density

    @property
    def cell_w(self) -> float:
        return self.w / self.density

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """Row-major cell index ``(i, j)``; edge coordinates clamp into the last cell.

        Indices come from floor(y*density/h) rather than y // (h/density):
        one rounded division instead of two, so integer coordinates that
        sit exactly on a cell boundary never land in the wrong cell.
        """
        i = min(int(y * self.density / self.h), self.density - 1)
        j = min(int(x * self.density / self.w), self.density - 1)
        return i, j


def _cross(o: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(ps: PointSet) -> Hull:
    """Convex hull via monotone chain; vertices in counter-clockwise order.

    Points interior to hull edges are not vertices, so the hull of a
    fully collinear set is its two extreme points. Sets of one or two
    points are their own hull. Raises ``EmptyPointSetError`` on empty
    input.
    """
    n = len(ps)
    if n == 0:
        raise EmptyPointSetError("convex hull of an empty point set")
    if n <= 2:
        return Hull(vertices=ps.points, source_count=n)

    pts = ps.points[np.lexsort((ps.points[:, 1], ps.points[:, 0]))]
    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    verts = np.array(lower[:-1] + upper[:-1], dtype=np.float64)
    return Hull(vertices=verts, source_count=n)


def prune_boundary(ps: PointSet, min_keep: int = DEFAULT_MIN_KEEP) -> PointSet:
    """Remove convex-hull vertices from ``ps``, preserving input order.

    Safeguard: when fewer than ``min_keep`` points would survive, the
    input is returned unchanged rather than over-pruned.
    """
    if min_keep < 0:
        raise ValueError(f"min_keep must be >= 0, got {min_keep}")
    if len(ps) == 0:
        raise EmptyPointSetError("cannot prune an empty point set")
    verts = convex_hull(ps).vertex_set()
    kept = [i for i, p in enumerate(ps) if (p.x, p.y) not in verts]
    if len(kept) < min_keep:
        return ps
    return PointSet(ps.points[kept], ps.space)


def global_centroid(ps: PointSet) -> Point:
    """Arithmetic mean of all points."""
    if len(ps) == 0:
        raise EmptyPointSetError("centroid of an empty point set")
    cx, cy = ps.points.mean(axis=0)
    return Point(float(cx), float(cy))


def sparsify(ps: PointSet, density: int) -> PointSet:
    """Keep one point per grid cell: the point nearest the global centroid.

    The space is split into ``density x density`` half-open cells
    ``[i*cell_h, (i+1)*cell_h) x [j*cell_w, (j+1)*cell_w)``; a point
    exactly on the far edge clamps into the last cell. Within each
    non-empty cell the point with the smallest Euclidean distance to the
    centroid of the *whole* set survives; exact distance ties prefer the
    point with smaller ``(y, x)``. Output is ordered by row-major cell
    index, so the result is deterministic regardless of input order.
    """
    if len(ps) == 0:
        raise EmptyPointSetError("cannot sparsify an empty point set")
    grid = GridSpec.for_space(ps.space, density)
    c = global_centroid(ps)

    xs, ys = ps.points[:, 0], ps.points[:, 1]
    rows = np.minimum((ys * density / grid.h).astype(np.int64), density - 1)
    cols = np.minimum((xs * density / grid.w).astype(np.int64), density - 1)
    keys = rows * density + cols
    d2 = (xs - c.x) ** 2 + (ys - c.y) ** 2

    # sort by (cell, distance, y, x); the first entry of each cell run wins
    order = np.lexsort((xs, ys, d2, keys))
    keys_sorted = keys[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = keys_sorted[1:] != keys_sorted[:-1]
    chosen = order[first]
    return PointSet(ps.points[chosen], ps.space)


def save_points(ps: PointSet, path: Union[str, Path]) -> None:
    """Write points as text, one ``x y`` pair per line."""
    lines = "".join(f"{x!r} {y!r}\n" for x, y in ps.as_tuples())
    atomic_write_bytes(lines.encode("ascii"), path)


def load_points(path: Union[str, Path], space: Space) -> PointSet:
    """Read an ``x y`` per line text file into a PointSet in ``space``."""
    rows = []
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{ln}: expected 'x y', got {line!r}")
        rows.append((float(parts[0]), float(parts[1])))
    return PointSet(np.array(rows, dtype=np.float64).reshape(-1, 2), space)
