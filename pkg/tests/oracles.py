"""Brute-force reference implementations the test suite checks against.

Everything here trades speed for obviousness: exact rational arithmetic,
O(n^3) scans, per-pixel loops. None of it imports the package under test.
"""

from __future__ import annotations

import math
from fractions import Fraction

Pt = tuple


def _exact(v):
    """Exact number for a coordinate: int when integral, else Fraction."""
    f = float(v)
    return int(f) if f.is_integer() else Fraction(f)


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _on_segment(p, a, b) -> bool:
    if _cross(a, b, p) != 0:
        return False
    return (
        min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
        and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
    )


def _in_triangle(p, a, b, c) -> bool:
    d1 = _cross(a, b, p)
    d2 = _cross(b, c, p)
    d3 = _cross(c, a, p)
    if d1 == 0 and d2 == 0 and d3 == 0:
        # degenerate triangle; membership reduces to the segment checks
        return _on_segment(p, a, b) or _on_segment(p, b, c) or _on_segment(p, a, c)
    has_neg = d1 < 0 or d2 < 0 or d3 < 0
    has_pos = d1 > 0 or d2 > 0 or d3 > 0
    return not (has_neg and has_pos)


def hull_vertices_bruteforce(points) -> set:
    """Vertex set of the convex hull by Caratheodory's theorem.

    A point is a vertex iff it is NOT a convex combination of the other
    points, i.e. lies in no segment/triangle spanned by them. Singletons
    and pairs are all vertices. Exact rational arithmetic throughout.
    """
    originals = [tuple(float(c) for c in p) for p in points]
    pts = [tuple(_exact(c) for c in p) for p in points]
    n = len(pts)
    if n <= 2:
        return set(originals)
    verts = set()
    for idx, p in enumerate(pts):
        others = pts[:idx] + pts[idx + 1 :]
        covered = False
        for i in range(len(others)):
            if others[i] == p:
                covered = True
                break
            for j in range(i + 1, len(others)):
                if _on_segment(p, others[i], others[j]):
                    covered = True
                    break
                for k in range(j + 1, len(others)):
                    if _in_triangle(p, others[i], others[j], others[k]):
                        covered = True
                        break
                if covered:
                    break
            if covered:
                break
        if not covered:
            verts.add(originals[idx])
    return verts


def sparsify_bruteforce(points, h: int, w: int, density: int):
    """Per-cell argmin distance to the global centroid, exact arithmetic.

    Ties on distance prefer smaller (y, x). Output is ordered by
    row-major cell index. Distances are compared as n^2*d^2 =
    (n*x - sum_x)^2 + (n*y - sum_y)^2, which stays in integers for
    integer inputs; Fraction covers the rest.
    """
    pts = [(_exact(x), _exact(y)) for x, y in points]
    n = len(pts)
    sx = sum(p[0] for p in pts)
    sy = sum(p[1] for p in pts)
    best = {}
    for x, y in pts:
        i = min(int(y * density // h if isinstance(y, int) else y * density / h), density - 1)
        j = min(int(x * density // w if isinstance(x, int) else x * density / w), density - 1)
        scaled_d2 = (n * x - sx) ** 2 + (n * y - sy) ** 2
        cand = (scaled_d2, y, x)
        if (i, j) not in best or cand < best[(i, j)][0]:
            best[(i, j)] = (cand, (float(x), float(y)))
    return [best[k][1] for k in sorted(best)]


def iou_bruteforce(a, b) -> float:
    inter = 0
    union = 0
    for row_a, row_b in zip(a, b):
        for va, vb in zip(row_a, row_b):
            if va and vb:
                inter += 1
            if va or vb:
                union += 1
    return 1.0 if union == 0 else inter / union


def erode_bruteforce(mask, radius: int, *, square=True, border_foreground=False):
    h, w = len(mask), len(mask[0])
    out = [[False] * w for _ in range(h)]
    for i in range(h):
        for j in range(w):
            keep = True
            for di in range(-radius, radius + 1):
                for dj in range(-radius, radius + 1):
                    if not square and di * di + dj * dj > radius * radius:
                        continue
                    ii, jj = i + di, j + dj
                    if 0 <= ii < h and 0 <= jj < w:
                        if not mask[ii][jj]:
                            keep = False
                    elif not border_foreground:
                        keep = False
                if not keep:
                    break
            out[i][j] = keep
    return out


def dilate_bruteforce(mask, radius: int, *, square=True):
    h, w = len(mask), len(mask[0])
    out = [[False] * w for _ in range(h)]
    for i in range(h):
        for j in range(w):
            hit = False
            for di in range(-radius, radius + 1):
                for dj in range(-radius, radius + 1):
                    if not square and di * di + dj * dj > radius * radius:
                        continue
                    ii, jj = i + di, j + dj
                    if 0 <= ii < h and 0 <= jj < w and mask[ii][jj]:
                        hit = True
                        break
                if hit:
                    break
            out[i][j] = hit
    return out


def grid_points_bruteforce(height: int, width: int, density: int):
    """Uniform (density+1)^2 lattice clamped into bounds, duplicates merged."""
    xs = sorted({min(Fraction(k * width, density), width - 1) for k in range(density + 1)})
    ys = sorted({min(Fraction(k * height, density), height - 1) for k in range(density + 1)})
    return [(float(x), float(y)) for y in ys for x in xs]


def filtered_count_bruteforce(mask, density: int) -> int:
    """How many lattice points land on foreground after round-half-up."""
    h, w = len(mask), len(mask[0])
    count = 0
    for x, y in grid_points_bruteforce(h, w, density):
        col = min(math.floor(x + 0.5), w - 1)
        row = min(math.floor(y + 0.5), h - 1)
        if mask[row][col]:
            count += 1
    return count
