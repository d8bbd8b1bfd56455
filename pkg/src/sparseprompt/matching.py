"""Prototype matching between dense feature maps, plus grid-to-pixel projection.

A reference image with a foreground mask yields a foreground prototype
(and optionally a background prototype). Target grid cells whose
descriptors are cosine-closest to the foreground win and become
candidate prompt locations in feature-grid coordinates.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .core import (
    BinaryMask,
    DimensionMismatchError,
    FeatureGrid,
    ImagePixels,
    PointSet,
)
from .pngio import atomic_write_bytes

__all__ = [
    "MatchingError",
    "FeatureMap",
    "MatchConfig",
    "DEFAULT_TAU",
    "DEFAULT_MAX_POINTS",
    "downsample_mask",
    "match_points",
    "project_to_image",
    "feature_map_to_bytes",
    "feature_map_from_bytes",
    "save_feature_map",
    "load_feature_map",
]

DEFAULT_TAU = 0.5
DEFAULT_MAX_POINTS = 400

_HEADER = struct.Struct("<III")
_EPS = 1e-12


class MatchingError(RuntimeError):
    """Raised when matching cannot produce any candidate points."""


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Dense descriptor grid of shape ``(h, w, d)``, float32, all finite."""

    data: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.data, dtype=np.float32)
        if a.ndim != 3:
            raise ValueError(f"feature map must be (h, w, d), got shape {a.shape}")
        if min(a.shape) < 1:
            raise ValueError(f"feature map dimensions must be positive, got {a.shape}")
        if not np.isfinite(a).all():
            raise ValueError("feature map contains non-finite values")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    @property
    def h(self) -> int:
        return int(self.data.shape[0])

    @property
    def w(self) -> int:
        return int(self.data.shape[1])

    @property
    def d(self) -> int:
        return int(self.data.shape[2])


@dataclass(frozen=True)
class MatchConfig:
    """Knobs for prototype matching.

    Attributes:
        tau: cosine-similarity floor in [-1, 1] for accepting a cell.
        max_points: cap on returned points; excess drops lowest-similarity.
        use_background_negatives: when True a cell must also be closer to
            the foreground prototype than to the background prototype.
    """

    tau: float = DEFAULT_TAU
    max_points: int = DEFAULT_MAX_POINTS
    use_background_negatives: bool = True

    def __post_init__(self) -> None:
        if not -1.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must be in [-1, 1], got {self.tau}")
        if self.max_points < 1:
            raise ValueError(f"max_points must be >= 1, got {self.max_points}")


def _cell_edges(n_src: int, n_cells: int) -> np.ndarray:
    # edge i = floor(i * n_src / n_cells); exact integer arithmetic
    return (np.arange(n_cells + 1, dtype=np.int64) * n_src) // n_cells


def downsample_mask(mask: BinaryMask, grid_h: int, grid_w: int) -> BinaryMask:
    """Reduce a pixel mask onto a grid; a cell is foreground at >= 50% coverage.

    Each grid cell covers a contiguous pixel block (the usual partition
    ``rows [floor(i*H/gh), floor((i+1)*H/gh))``); the cell is foreground
    iff at least half of its source pixels are foreground.
    """
    if grid_h < 1 or grid_w < 1:
        raise ValueError(f"grid dimensions must be positive, got {grid_h}x{grid_w}")
    if grid_h > mask.height or grid_w > mask.width:
        raise DimensionMismatchError(
            f"grid {grid_h}x{grid_w} is larger than mask {mask.height}x{mask.width}"
        )
    row_edges = _cell_edges(mask.height, grid_h)
    col_edges = _cell_edges(mask.width, grid_w)
    counts = np.add.reduceat(mask.data.astype(np.int64), row_edges[:-1], axis=0)
    counts = np.add.reduceat(counts, col_edges[:-1], axis=1)
    areas = np.diff(row_edges)[:, None] * np.diff(col_edges)[None, :]
    return BinaryMask(counts * 2 >= areas)


def _normalize_rows(v: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.maximum(norms, _EPS)


def match_points(
    f_ref: FeatureMap,
    m_ref: BinaryMask,
    f_tgt: FeatureMap,
    cfg: MatchConfig = MatchConfig(),
) -> PointSet:
    """Select target grid cells cosine-similar to the reference foreground.

    The foreground prototype is the L2-normalized mean of reference
    descriptors in foreground cells (mask downsampled to the reference
    grid); the background prototype is the analogue over background
    cells. A target cell qualifies when its similarity to the foreground
    prototype reaches ``cfg.tau`` and, with background negatives enabled,
    strictly exceeds its similarity to the background prototype. Output
    is ordered by descending foreground similarity, ties broken by
    row-major cell index, and capped at ``cfg.max_points`` by keeping
    the highest-similarity cells.

    Raises:
        MatchingError: the downsampled reference mask has no foreground
            cells, or no target cell qualifies.
        DimensionMismatchError: reference and target descriptor dims differ.
    """
    if f_ref.d != f_tgt.d:
        raise DimensionMismatchError(
            f"descriptor dims differ: reference d={f_ref.d}, target d={f_tgt.d}"
        )
    grid = downsample_mask(m_ref, f_ref.h, f_ref.w)
    fg = grid.data.ravel()
    if not fg.any():
        raise MatchingError("empty reference foreground after downsampling")

    ref = f_ref.data.reshape(-1, f_ref.d).astype(np.float64)
    proto_fg = _normalize_rows(ref[fg].mean(axis=0))
    bg = ~fg
    proto_bg = _normalize_rows(ref[bg].mean(axis=0)) if bg.any() else None

    tgt = _normalize_rows(f_tgt.data.reshape(-1, f_tgt.d).astype(np.float64))
    sim_fg = tgt @ proto_fg
    keep = sim_fg >= cfg.tau
    if cfg.use_background_negatives and proto_bg is not None:
        keep &= sim_fg > (tgt @ proto_bg)

    idx = np.flatnonzero(keep)
    if idx.size == 0:
        raise MatchingError("no candidate points above threshold")

    # descending similarity, ties by row-major cell index
    order = np.lexsort((idx, -sim_fg[idx]))
    idx = idx[order][: cfg.max_points]
    xs = (idx % f_tgt.w).astype(np.float64)
    ys = (idx // f_tgt.w).astype(np.float64)
    return PointSet(np.column_stack([xs, ys]), FeatureGrid(f_tgt.h, f_tgt.w))


def project_to_image(ps: PointSet, height: int, width: int) -> PointSet:
    """Map feature-grid coordinates to image pixels via cell centers.

    A grid point ``(x, y)`` on an ``h x w`` grid maps to
    ``((x + 1/2) * W / w, (y + 1/2) * H / h)``, i.e. the center of its
    grid cell in pixel space. Output is strictly interior to the image
    and preserves input order.
    """
    if not isinstance(ps.space, FeatureGrid):
        raise TypeError(f"projection expects FeatureGrid input, got {ps.space}")
    if height < 1 or width < 1:
        raise ValueError(f"image dimensions must be positive, got {height}x{width}")
    xs = (ps.points[:, 0] + 0.5) * width / ps.space.w
    ys = (ps.points[:, 1] + 0.5) * height / ps.space.h
    return PointSet(np.column_stack([xs, ys]), ImagePixels(height, width))


def feature_map_to_bytes(fm: FeatureMap) -> bytes:
    """Serialize: u32-LE ``h, w, d`` header then row-major channel-last f32-LE."""
    payload = np.ascontiguousarray(fm.data, dtype="<f4").tobytes()
    return _HEADER.pack(fm.h, fm.w, fm.d) + payload


def feature_map_from_bytes(buf: bytes) -> FeatureMap:
    if len(buf) < _HEADER.size:
        raise ValueError(f"feature payload too short for header: {len(buf)} bytes")
    h, w, d = _HEADER.unpack_from(buf)
    expected = _HEADER.size + h * w * d * 4
    if len(buf) != expected:
        raise ValueError(
            f"malformed tensor payload: header says {h}x{w}x{d} "
            f"({expected} bytes total), got {len(buf)}"
        )
    data = np.frombuffer(buf, dtype="<f4", offset=_HEADER.size).reshape(h, w, d)
    return FeatureMap(data)


def save_feature_map(fm: FeatureMap, path: Union[str, Path]) -> None:
    atomic_write_bytes(feature_map_to_bytes(fm), path)


def load_feature_map(path: Union[str, Path]) -> FeatureMap:
    return feature_map_from_bytes(Path(path).read_bytes())
