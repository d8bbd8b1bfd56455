"""Encoder/segmenter backends: interfaces, deterministic oracles, record/replay.

Everything desk-scale runs through these: the oracle segmenter answers
from registered ground truth with a configurable fidelity model, the
patch-intensity encoder gives two-tone synthetic images a feature map
worth matching against, and the recording/replay wrappers freeze any
backend's responses into fixture files keyed by request digest.
"""

from __future__ import annotations

import abc
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Tuple, Union

import numpy as np
from scipy import ndimage as ndi

from .core import (
    BinaryMask,
    EmptyPointSetError,
    Episode,
    Image,
    ImagePixels,
    PointSet,
    point_in_mask,
)
from .matching import FeatureMap, feature_map_to_bytes, feature_map_from_bytes
from .pngio import atomic_write_bytes, mask_from_png_bytes, mask_to_png_bytes

__all__ = [
    "BackendError",
    "TransportError",
    "BackendInfo",
    "EncoderBackend",
    "SegmenterBackend",
    "OracleSpec",
    "OracleSegmenter",
    "PatchIntensityEncoder",
    "RecordingEncoder",
    "ReplayEncoder",
    "RecordingSegmenter",
    "ReplaySegmenter",
    "image_digest",
]

ORACLE_MODES = ("perfect", "density_peaked", "erosion_proportional")


class BackendError(RuntimeError):
    """A backend could not produce a usable response."""


class TransportError(BackendError):
    """A remote backend was unreachable or kept failing."""


@dataclass(frozen=True)
class BackendInfo:
    """Capability descriptor a backend publishes about itself.

    ``input_size`` is the (H, W) the model expects (None: native size),
    ``grid`` the encoder output grid, ``dim`` the descriptor length.
    ``max_in_flight`` is the request concurrency the backend tolerates;
    callers must not exceed it.
    """

    name: str
    input_size: Optional[Tuple[int, int]] = None
    grid: Optional[Tuple[int, int]] = None
    dim: Optional[int] = None
    max_in_flight: int = 1

    def __post_init__(self) -> None:
        if self.max_in_flight < 1:
            raise ValueError(f"max_in_flight must be >= 1, got {self.max_in_flight}")


class EncoderBackend(abc.ABC):
    """Maps an image to a dense descriptor grid. Deterministic per identity."""

    info: BackendInfo

    @abc.abstractmethod
    def encode(self, image: Image) -> FeatureMap:
        raise NotImplementedError

    def _check_output(self, fm: FeatureMap) -> FeatureMap:
        if self.info.grid is not None and (fm.h, fm.w) != tuple(self.info.grid):
            raise BackendError(
                f"dimension mismatch: declared grid {self.info.grid}, got {(fm.h, fm.w)}"
            )
        if self.info.dim is not None and fm.d != self.info.dim:
            raise BackendError(
                f"dimension mismatch: declared d={self.info.dim}, payload carries d={fm.d}"
            )
        return fm


class SegmenterBackend(abc.ABC):
    """Maps (image, prompt points) to a mask at image resolution."""

    info: BackendInfo

    @abc.abstractmethod
    def segment(self, image: Image, prompts: PointSet) -> BinaryMask:
        raise NotImplementedError

    @staticmethod
    def _check_prompts(image: Image, prompts: PointSet) -> None:
        if len(prompts) == 0:
            raise EmptyPointSetError("segmentation requires at least one prompt point")
        space = prompts.space
        if not isinstance(space, ImagePixels) or (space.h, space.w) != (image.height, image.width):
            raise ValueError(
                f"prompts must be in the image's pixel space "
                f"({image.height}x{image.width}), got {space}"
            )


def image_digest(image: Image) -> str:
    h = hashlib.sha256()
    h.update(f"{image.height}:{image.width}:{image.channels}:".encode())
    h.update(np.ascontiguousarray(image.data).tobytes())
    return h.hexdigest()


def _request_digest(kind: str, image: Image, prompts: Optional[PointSet] = None) -> str:
    h = hashlib.sha256()
    h.update(kind.encode())
    h.update(image_digest(image).encode())
    if prompts is not None:
        h.update(np.ascontiguousarray(prompts.points, dtype="<f8").tobytes())
        h.update(b"labels:" + b"1" * len(prompts))
    return h.hexdigest()


@dataclass(frozen=True)
class OracleSpec:
    """Configuration of the synthetic oracle segmenter.

    Modes:
        perfect: return the ground truth iff at least one prompt lies
            inside it, else an empty mask.
        density_peaked: fidelity peaks when the prompt count equals
            ``peak`` and decays as ``1 / (1 + falloff * |n - peak|)``;
            the returned mask is the ground truth truncated (row-major)
            to hit that IoU exactly.
        erosion_proportional: ground truth eroded by radius
            ``rate * n`` (Euclidean distance threshold), so more prompts
            monotonically shrink the answer.
    """

    mode: str = "perfect"
    peak: Optional[int] = None
    falloff: float = 0.5
    rate: float = 0.5

    def __post_init__(self) -> None:
        if self.mode not in ORACLE_MODES:
            raise ValueError(f"mode must be one of {ORACLE_MODES}, got {self.mode!r}")
        if self.mode == "density_peaked":
            if self.peak is None or self.peak < 1:
                raise ValueError("density_peaked requires peak >= 1")
            if self.falloff <= 0:
                raise ValueError(f"falloff must be positive, got {self.falloff}")
        if self.mode == "erosion_proportional" and self.rate <= 0:
            raise ValueError(f"rate must be positive, got {self.rate}")

    @classmethod
    def from_dict(cls, data: Mapping) -> "OracleSpec":
        allowed = {"mode", "peak", "falloff", "rate"}
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown oracle spec keys: {sorted(unknown)}")
        return cls(**{k: data[k] for k in allowed & set(data)})


class OracleSegmenter(SegmenterBackend):
    """Answers segmentation requests from registered ground-truth masks.

    Ground truths are keyed by image content digest, so one oracle can
    serve a whole dataset: register every reference mask and target
    ground truth, then hand the oracle to the pipeline like any backend.
    """

    def __init__(self, spec: OracleSpec = OracleSpec(), truths: Optional[Mapping[str, BinaryMask]] = None):
        self.spec = spec
        self.info = BackendInfo(name=f"oracle-{spec.mode}")
        self._truths: dict[str, BinaryMask] = dict(truths) if truths else {}

    def register(self, image: Image, gt: BinaryMask) -> None:
        if (image.height, image.width) != (gt.height, gt.width):
            raise ValueError("ground truth dimensions must match the image")
        self._truths[image_digest(image)] = gt

    @classmethod
    def for_episode(cls, spec: OracleSpec, episode: Episode) -> "OracleSegmenter":
        oracle = cls(spec)
        for img, mask in episode.references:
            oracle.register(img, mask)
        if episode.target_gt is not None:
            oracle.register(episode.target, episode.target_gt)
        return oracle

    @classmethod
    def for_episodes(cls, spec: OracleSpec, episodes: Iterable[Episode]) -> "OracleSegmenter":
        oracle = cls(spec)
        for ep in episodes:
            for img, mask in ep.references:
                oracle.register(img, mask)
            if ep.target_gt is not None:
                oracle.register(ep.target, ep.target_gt)
        return oracle

    def segment(self, image: Image, prompts: PointSet) -> BinaryMask:
        self._check_prompts(image, prompts)
        digest = image_digest(image)
        gt = self._truths.get(digest)
        if gt is None:
            raise BackendError(
                f"oracle has no ground truth registered for image {digest[:12]}"
            )
        if self.spec.mode == "perfect":
            if any(point_in_mask(p, gt) for p in prompts):
                return gt
            return BinaryMask(np.zeros_like(gt.data))
        if self.spec.mode == "density_peaked":
            return self._density_peaked(gt, len(prompts))
        return self._eroded(gt, len(prompts))

    def _density_peaked(self, gt: BinaryMask, n: int) -> BinaryMask:
        target_iou = 1.0 / (1.0 + self.spec.falloff * abs(n - self.spec.peak))
        area = gt.foreground_count
        keep = int(target_iou * area + 0.5)
        out = np.zeros(gt.data.size, dtype=bool)
        fg = np.flatnonzero(gt.data.ravel())
        out[fg[:keep]] = True
        return BinaryMask(out.reshape(gt.data.shape))

    def _eroded(self, gt: BinaryMask, n: int) -> BinaryMask:
        radius = self.spec.rate * n
        if not gt.data.any():
            return gt
        dist = ndi.distance_transform_edt(gt.data)
        return BinaryMask(dist > radius)


class PatchIntensityEncoder(EncoderBackend):
    """Deterministic desk-scale encoder: one 2-d descriptor per grid cell.

    Each cell's descriptor is ``[a, 1 - a]`` where ``a`` is the cell's
    mean intensity in [0, 1]. Two-tone synthetic scenes separate cleanly
    under cosine matching; real feature extractors plug in through the
    same interface remotely.
    """

    def __init__(self, grid: Tuple[int, int] = (16, 16)):
        self.info = BackendInfo(name="patch-intensity", grid=tuple(grid), dim=2)

    def encode(self, image: Image) -> FeatureMap:
        gh, gw = self.info.grid
        if gh > image.height or gw > image.width:
            raise BackendError(
                f"image {image.height}x{image.width} smaller than encoder grid {gh}x{gw}"
            )
        gray = image.data.astype(np.float64)
        if gray.ndim == 3:
            gray = gray.mean(axis=2)
        gray /= 255.0
        row_edges = (np.arange(gh + 1, dtype=np.int64) * image.height) // gh
        col_edges = (np.arange(gw + 1, dtype=np.int64) * image.width) // gw
        sums = np.add.reduceat(gray, row_edges[:-1], axis=0)
        sums = np.add.reduceat(sums, col_edges[:-1], axis=1)
        areas = np.diff(row_edges)[:, None] * np.diff(col_edges)[None, :]
        a = sums / areas
        fm = FeatureMap(np.stack([a, 1.0 - a], axis=-1).astype(np.float32))
        return self._check_output(fm)


class RecordingEncoder(EncoderBackend):
    """Pass-through encoder that captures responses as fixture files."""

    def __init__(self, inner: EncoderBackend, root: Union[str, Path]):
        self.inner = inner
        self.info = inner.info
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def encode(self, image: Image) -> FeatureMap:
        fm = self.inner.encode(image)
        digest = _request_digest("encode:", image)
        atomic_write_bytes(feature_map_to_bytes(fm), self.root / f"{digest}.fmap")
        return fm


class ReplayEncoder(EncoderBackend):
    """Answers encode requests from fixture files; offline by construction."""

    def __init__(self, root: Union[str, Path], info: Optional[BackendInfo] = None):
        self.root = Path(root)
        self.info = info or BackendInfo(name="replay-encoder")

    def encode(self, image: Image) -> FeatureMap:
        digest = _request_digest("encode:", image)
        path = self.root / f"{digest}.fmap"
        if not path.exists():
            raise BackendError(f"no recorded response for encode request {digest[:12]}")
        return self._check_output(feature_map_from_bytes(path.read_bytes()))


class RecordingSegmenter(SegmenterBackend):
    """Pass-through segmenter that captures responses as mask PNG fixtures."""

    def __init__(self, inner: SegmenterBackend, root: Union[str, Path]):
        self.inner = inner
        self.info = inner.info
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def segment(self, image: Image, prompts: PointSet) -> BinaryMask:
        mask = self.inner.segment(image, prompts)
        digest = _request_digest("segment:", image, prompts)
        atomic_write_bytes(mask_to_png_bytes(mask), self.root / f"{digest}.png")
        return mask


class ReplaySegmenter(SegmenterBackend):
    """Answers segment requests from mask PNG fixtures."""

    def __init__(self, root: Union[str, Path], info: Optional[BackendInfo] = None):
        self.root = Path(root)
        self.info = info or BackendInfo(name="replay-segmenter")

    def segment(self, image: Image, prompts: PointSet) -> BinaryMask:
        self._check_prompts(image, prompts)
        digest = _request_digest("segment:", image, prompts)
        path = self.root / f"{digest}.png"
        if not path.exists():
            raise BackendError(f"no recorded response for segment request {digest[:12]}")
        return mask_from_png_bytes(path.read_bytes())
