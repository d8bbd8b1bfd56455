"""Reference-conditioned prompt-density lookup.

The right number of prompt points depends on the segmenter, not just the
object, so it is measured: each candidate grid density is scored on the
annotated references (uniform grid, keep foreground points, segment,
compare to the reference mask) and the best-scoring density wins.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .backend import BackendError, SegmenterBackend
from .core import (
    BinaryMask,
    DimensionMismatchError,
    Image,
    ImagePixels,
    PointSet,
    iou,
    point_in_mask,
)

__all__ = [
    "DEFAULT_CANDIDATES",
    "DensityCandidates",
    "DensityVerdict",
    "sample_reference_grid",
    "filter_foreground",
    "score_density",
    "lookup_reference_density",
]

DEFAULT_CANDIDATES = (2, 4, 6, 8, 12, 16)


@dataclass(frozen=True)
class DensityCandidates:
    """Strictly increasing positive candidate grid densities."""

    values: Tuple[int, ...] = DEFAULT_CANDIDATES

    def __post_init__(self) -> None:
        vals = tuple(int(v) for v in self.values)
        if len(vals) == 0:
            raise ValueError("candidate set must not be empty")
        if vals[0] < 1:
            raise ValueError(f"densities must be positive, got {vals[0]}")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError(f"densities must be strictly increasing, got {vals}")
        object.__setattr__(self, "values", vals)

    def __iter__(self):
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, i: int) -> int:
        return self.values[i]

    @classmethod
    def parse(cls, text: str) -> "DensityCandidates":
        """Parse a comma-separated density list such as ``"2,4,8"``."""
        try:
            vals = tuple(int(part) for part in text.split(",") if part.strip())
        except ValueError as e:
            raise ValueError(f"bad density list {text!r}: {e}") from None
        return cls(vals)


@dataclass(frozen=True, eq=False)
class DensityVerdict:
    """Outcome of the lookup: mean score per density plus the winner.

    ``per_reference`` is a ``(K, len(candidates))`` matrix of raw scores,
    rows in reference order, columns in candidate order.
    """

    scores: Tuple[Tuple[int, float], ...]
    selected: int
    per_reference: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.per_reference, dtype=np.float64)
        if m.ndim != 2 or m.shape[1] != len(self.scores):
            raise ValueError("per_reference must be (K, len(candidates))")
        if self.selected not in {d for d, _ in self.scores}:
            raise ValueError(f"selected density {self.selected} not among candidates")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "per_reference", m)

    def score_of(self, density: int) -> float:
        for d, s in self.scores:
            if d == density:
                return s
        raise KeyError(density)


def sample_reference_grid(height: int, width: int, density: int) -> PointSet:
    """Uniform ``(density+1)^2`` grid over the image, clamped inside.

    Grid coordinates are ``m * W / density`` and ``n * H / density`` for
    ``m, n in 0..density``; the far edge clamps to the last pixel and
    duplicates created by clamping collapse. Output is ordered row-major
    (y outer, x inner).
    """
    if height < 1 or width < 1:
        raise ValueError(f"image dimensions must be positive, got {height}x{width}")
    if density < 1:
        raise ValueError(f"density must be >= 1, got {density}")
    steps = np.arange(density + 1, dtype=np.float64)
    xs = np.unique(np.minimum(steps * width / density, width - 1))
    ys = np.unique(np.minimum(steps * height / density, height - 1))
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    return PointSet(pts, ImagePixels(height, width))


def filter_foreground(ps: PointSet, mask: BinaryMask) -> PointSet:
    """Subset of ``ps`` landing on foreground pixels of ``mask``; order kept."""
    if len(ps) == 0:
        return ps
    keep = [i for i, p in enumerate(ps) if point_in_mask(p, mask)]
    return PointSet(ps.points[keep], ps.space)


def score_density(
    image: Image,
    m_ref: BinaryMask,
    density: int,
    seg: SegmenterBackend,
) -> float:
    """IoU achieved on one reference when prompted at ``density``.

    Samples the uniform grid, keeps foreground points, segments, and
    scores against the reference mask. An empty filtered point set
    scores 0.0 without invoking the backend. Backend failures propagate
    wrapped with the density that triggered them.
    """
    if (image.height, image.width) != (m_ref.height, m_ref.width):
        raise DimensionMismatchError(
            f"reference mask {m_ref.height}x{m_ref.width} does not match "
            f"image {image.height}x{image.width}"
        )
    grid = sample_reference_grid(image.height, image.width, density)
    prompts = filter_foreground(grid, m_ref)
    if len(prompts) == 0:
        return 0.0
    try:
        predicted = seg.segment(image, prompts)
    except BackendError as e:
        raise BackendError(f"segmenter failed at density {density}: {e}") from e
    return iou(predicted, m_ref)


def lookup_reference_density(
    references: Sequence[Tuple[Image, BinaryMask]],
    candidates: DensityCandidates,
    seg: SegmenterBackend,
) -> DensityVerdict:
    """Score every candidate density on every reference and pick the winner.

    The selected density maximizes the mean score across references;
    exact ties resolve to the smallest density. An all-zero score table
    is a valid verdict selecting the smallest candidate.
    """
    refs = list(references)
    if len(refs) < 1:
        raise ValueError("density lookup needs at least one reference")
    per_ref = np.zeros((len(refs), len(candidates)), dtype=np.float64)
    for k, (img, m_ref) in enumerate(refs):
        for i, d in enumerate(candidates):
            per_ref[k, i] = score_density(img, m_ref, d, seg)
    means = per_ref.mean(axis=0)

    best_i = 0
    for i in range(1, len(candidates)):
        if means[i] > means[best_i]:
            best_i = i
    scores = tuple((int(d), float(means[i])) for i, d in enumerate(candidates))
    return DensityVerdict(scores=scores, selected=int(candidates[best_i]), per_reference=per_ref)
