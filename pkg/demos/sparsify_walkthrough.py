"""
Point sparsification, stage by stage
====================================

Matching a reference against a target tends to produce far more
candidate points than a promptable segmenter wants to see, and the
surplus clusters along object boundaries where matches are least
reliable.  This script walks one synthetic point cloud through the
two reduction stages the pipeline applies: convex-hull boundary
pruning, then grid-cell decimation toward the global centroid.

Run it directly; it prints an ASCII frame after every stage.
"""

import math

import numpy as np

from sparseprompt import (
    ImagePixels,
    PointSet,
    convex_hull,
    prune_boundary,
    sparsify,
)

SIDE = 33


def render(ps, mark="o"):
    """ASCII view of a point set in its pixel frame."""
    frame = [["."] * SIDE for _ in range(SIDE)]
    for x, y in ps.as_tuples():
        frame[int(round(y))][int(round(x))] = mark
    return "\n".join("".join(row) for row in frame)


# ---------------------------------------------------------------
# A cloud that exaggerates the failure mode: a dense ring of rim
# points (boundary-hugging matches) around a loose interior scatter.
rng = np.random.default_rng(20240317)
cx = cy = SIDE / 2

rim = [
    (cx + 13.0 * math.cos(t), cy + 13.0 * math.sin(t))
    for t in np.linspace(0.0, 2.0 * math.pi, 28, endpoint=False)
]
interior = [
    (float(x), float(y))
    for x, y in rng.uniform(cx - 8, cx + 8, size=(24, 2))
]
seen = set()
pts = []
for p in rim + interior:
    key = (round(p[0], 6), round(p[1], 6))
    if key not in seen:
        seen.add(key)
        pts.append(p)

cloud = PointSet(pts, ImagePixels(SIDE, SIDE))
print(f"matched candidates: {len(cloud)} points")
print(render(cloud))
print()

# ---------------------------------------------------------------
# Stage 1: drop the convex-hull vertices.  Only strict corners of
# the hull count; collinear rim points survive this pass, which is
# why pruning is gentle rather than a ring-eraser.
hull = convex_hull(cloud)
pruned = prune_boundary(cloud)
print(f"hull has {len(hull.vertex_set())} vertices; "
      f"{len(cloud)} -> {len(pruned)} after pruning")
print(render(pruned))
print()

# ---------------------------------------------------------------
# Stage 2: decimate on a DxD grid.  Each occupied cell sends one
# survivor, the point nearest the centroid of the whole pruned set,
# so the result stays spread out but leans toward the object core.
# The cap is an upper bound, not a quota: a clustered cloud can
# occupy fewer cells on a finer grid than on a coarser one.
for density in (2, 3, 4):
    kept = sparsify(pruned, density)
    print(f"density {density}: {len(pruned)} -> {len(kept)} points "
          f"(cap {density * density})")

final = sparsify(pruned, 3)
print()
print(render(final, mark="#"))
