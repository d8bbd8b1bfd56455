"""Core raster and point types shared by every pipeline stage.

Conventions used throughout the package:

* masks are boolean rasters with ``True`` meaning foreground,
* points are continuous ``(x, y)`` coordinates with ``x`` horizontal
  (column direction) and ``y`` vertical (row direction),
* rasters are row-major, indexed ``[row, col]``.

All types are immutable after construction and every operation is a
pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import floor
from typing import Iterator, NamedTuple, Optional, Sequence, Union

import numpy as np

__all__ = [
    "DimensionMismatchError",
    "EmptyPointSetError",
    "Image",
    "BinaryMask",
    "Point",
    "FeatureGrid",
    "ImagePixels",
    "Space",
    "PointSet",
    "Episode",
    "iou",
    "point_in_mask",
]


class DimensionMismatchError(ValueError):
    """Raised when two rasters (or a raster and a grid) disagree in shape."""


class EmptyPointSetError(ValueError):
    """Raised by operations that are undefined for zero points."""


def _frozen_array(a: np.ndarray) -> np.ndarray:
    out = a.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Image:
    """8-bit raster, grayscale ``(H, W)`` or RGB ``(H, W, 3)``.

    Attributes:
        data: row-major uint8 pixel array. A copy is taken and marked
            read-only, so instances never alias caller memory.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.data)
        if a.dtype != np.uint8:
            raise ValueError(f"image data must be uint8, got {a.dtype}")
        if a.ndim == 3 and a.shape[2] == 1:
            a = a[:, :, 0]
        if a.ndim == 2:
            pass
        elif a.ndim == 3 and a.shape[2] == 3:
            pass
        else:
            raise ValueError(f"image must be (H, W) or (H, W, 3), got shape {a.shape}")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"image dimensions must be positive, got {a.shape}")
        object.__setattr__(self, "data", _frozen_array(a))

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else int(self.data.shape[2])


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Boolean raster where ``True`` marks foreground pixels."""

    data: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.data)
        if a.dtype != np.bool_:
            raise ValueError(f"mask data must be bool, got {a.dtype}")
        if a.ndim != 2:
            raise ValueError(f"mask must be 2-d, got shape {a.shape}")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"mask dimensions must be positive, got {a.shape}")
        object.__setattr__(self, "data", _frozen_array(a))

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def foreground_count(self) -> int:
        return int(self.data.sum())

    def is_empty(self) -> bool:
        return not bool(self.data.any())


class Point(NamedTuple):
    """Continuous 2D coordinate; ``x`` is horizontal, ``y`` vertical."""

    x: float
    y: float


@dataclass(frozen=True)
class FeatureGrid:
    """Coordinate space of an encoder output grid: ``h`` rows by ``w`` columns."""

    h: int
    w: int

    def __post_init__(self) -> None:
        if self.h < 1 or self.w < 1:
            raise ValueError(f"grid dimensions must be positive, got {self.h}x{self.w}")


@dataclass(frozen=True)
class ImagePixels:
    """Coordinate space of an image raster: ``h`` rows by ``w`` columns."""

    h: int
    w: int

    def __post_init__(self) -> None:
        if self.h < 1 or self.w < 1:
            raise ValueError(f"image dimensions must be positive, got {self.h}x{self.w}")


Space = Union[FeatureGrid, ImagePixels]


@dataclass(frozen=True, eq=False)
class PointSet:
    """Ordered set of points tagged with the space they live in.

    Invariants enforced at construction: coordinates are finite, every
    point satisfies ``0 <= x < space.w`` and ``0 <= y < space.h``, and
    no two points are exactly equal. Order is whatever the caller
    supplied and is preserved by every operation in the package.

    Example:
        >>> ps = PointSet([(1.0, 2.0), (3.5, 0.0)], ImagePixels(4, 4))
        >>> len(ps)
        2
        >>> ps[1]
        Point(x=3.5, y=0.0)
    """

    points: np.ndarray
    space: Space

    def __post_init__(self) -> None:
        a = np.asarray(self.points, dtype=np.float64)
        if a.size == 0:
            a = a.reshape(0, 2)
        if a.ndim != 2 or a.shape[1] != 2:
            raise ValueError(f"points must be an (N, 2) array, got shape {a.shape}")
        if not isinstance(self.space, (FeatureGrid, ImagePixels)):
            raise TypeError(f"space must be FeatureGrid or ImagePixels, got {type(self.space)!r}")
        if a.size and not np.isfinite(a).all():
            raise ValueError("point coordinates must be finite")
        if a.size:
            x, y = a[:, 0], a[:, 1]
            if (x < 0).any() or (x >= self.space.w).any() or (y < 0).any() or (y >= self.space.h).any():
                raise ValueError(
                    f"points out of bounds for {self.space}: "
                    f"x in [{x.min()}, {x.max()}], y in [{y.min()}, {y.max()}]"
                )
            if np.unique(a, axis=0).shape[0] != a.shape[0]:
                raise ValueError("duplicate points are not allowed")
        object.__setattr__(self, "points", _frozen_array(a))

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def __iter__(self) -> Iterator[Point]:
        for x, y in self.points:
            yield Point(float(x), float(y))

    def __getitem__(self, i: int) -> Point:
        x, y = self.points[i]
        return Point(float(x), float(y))

    def as_tuples(self) -> list[tuple[float, float]]:
        return [(float(x), float(y)) for x, y in self.points]


@dataclass(frozen=True, eq=False)
class Episode:
    """One few-shot task: K annotated references plus a target image.

    Attributes:
        references: non-empty sequence of (image, mask) pairs; each mask
            must match its image's dimensions.
        target: the image to segment.
        target_gt: optional ground truth for the target, used for scoring.
    """

    references: tuple[tuple[Image, BinaryMask], ...]
    target: Image
    target_gt: Optional[BinaryMask] = None

    def __post_init__(self) -> None:
        refs = tuple(tuple(pair) for pair in self.references)
        if len(refs) < 1:
            raise ValueError("episode needs at least one reference")
        for i, (img, mask) in enumerate(refs):
            if not isinstance(img, Image) or not isinstance(mask, BinaryMask):
                raise TypeError(f"reference {i} must be an (Image, BinaryMask) pair")
            if (img.height, img.width) != (mask.height, mask.width):
                raise DimensionMismatchError(
                    f"reference {i}: mask {mask.height}x{mask.width} "
                    f"does not match image {img.height}x{img.width}"
                )
        if not isinstance(self.target, Image):
            raise TypeError("target must be an Image")
        if self.target_gt is not None:
            if (self.target.height, self.target.width) != (self.target_gt.height, self.target_gt.width):
                raise DimensionMismatchError(
                    f"target ground truth {self.target_gt.height}x{self.target_gt.width} "
                    f"does not match target image {self.target.height}x{self.target.width}"
                )
        object.__setattr__(self, "references", refs)

    @property
    def k(self) -> int:
        return len(self.references)


def iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union of two masks of identical dimensions.

    Two empty masks have IoU 1.0 by the empty-union convention.

    Example:
        >>> m = np.zeros((2, 2), dtype=bool)
        >>> a = m.copy(); a[0, 0] = a[1, 0] = True   # {(0,0), (0,1)} as (x, y)
        >>> b = m.copy(); b[1, 0] = b[1, 1] = True   # {(0,1), (1,1)}
        >>> round(iou(BinaryMask(a), BinaryMask(b)), 6)
        0.333333
    """
    if a.data.shape != b.data.shape:
        raise DimensionMismatchError(
            f"mask shapes differ: {a.data.shape} vs {b.data.shape}"
        )
    union = int(np.logical_or(a.data, b.data).sum())
    if union == 0:
        return 1.0
    inter = int(np.logical_and(a.data, b.data).sum())
    return inter / union


def _round_half_up(v: float) -> int:
    # round-half-up, not banker's rounding: 2.5 -> 3, 3.5 -> 4
    return int(floor(v + 0.5))


def point_in_mask(p: Union[Point, Sequence[float]], m: BinaryMask) -> bool:
    """True when ``p`` lands on a foreground pixel of ``m``.

    The continuous coordinate is snapped to the nearest pixel with
    round-half-up semantics and clamped into the raster, so points just
    outside the border are attributed to the nearest border pixel.

    Example:
        >>> raster = np.zeros((3, 5), dtype=bool)
        >>> raster[2, 4] = True
        >>> point_in_mask(Point(3.6, 2.2), BinaryMask(raster))
        True
    """
    x, y = float(p[0]), float(p[1])
    col = min(max(_round_half_up(x), 0), m.width - 1)
    row = min(max(_round_half_up(y), 0), m.height - 1)
    return bool(m.data[row, col])
