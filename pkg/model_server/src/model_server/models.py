"""Checkpoint resolution and the two model roles the server fills.

A checkpoint id starting with "stub:" resolves to a deterministic
CPU-only model with the exact geometry of its real counterpart, so the
wire protocol can be exercised (and fixtures recorded) on machines with
no weights and no GPU. Any other id is treated as a Hugging Face model
id and loaded lazily through transformers; those imports happen inside
the loader so the stub path never touches torch.
"""

from __future__ import annotations

from typing import Optional, Protocol

import numpy as np
from scipy import ndimage

from .letterbox import Letterbox

ENCODER_SIDE = 518
ENCODER_PATCH = 14
SEGMENTER_SIDE = 1024

STUB_ENCODER_ID = "stub:dinov2-vit-l14"
STUB_SEGMENTER_ID = "stub:sam-vit-h"
DEFAULT_ENCODER_ID = "facebook/dinov2-large"
DEFAULT_SEGMENTER_ID = "facebook/sam-vit-huge"

# SAM's published post-processing defaults; surfaced in /v1/health.
SEGMENTER_DEFAULTS = {
    "mask_threshold": 0.0,
    "multimask": True,
    "selection": "highest-score",
}


class CheckpointError(RuntimeError):
    """Checkpoint id cannot be resolved to a servable model."""


class Encoder(Protocol):
    grid: tuple[int, int]
    dim: int

    def encode(self, image: np.ndarray) -> np.ndarray: ...


class Segmenter(Protocol):
    def segment(
        self, image: np.ndarray, points: list[tuple[float, float]]
    ) -> tuple[np.ndarray, float]: ...


def _as_rgb(image: np.ndarray) -> np.ndarray:
    if image.ndim == 2:
        return np.stack([image] * 3, axis=-1)
    return image[..., :3]


class StubEncoder:
    """ViT-L/14 geometry without the ViT: patch means under a fixed projection.

    Output is content-dependent and deterministic, which is all the
    protocol and record/replay fixtures require.
    """

    def __init__(self) -> None:
        self.grid = (ENCODER_SIDE // ENCODER_PATCH, ENCODER_SIDE // ENCODER_PATCH)
        self.dim = 1024
        rng = np.random.default_rng(1402)
        self._proj = rng.standard_normal((8, self.dim)).astype(np.float32)

    def encode(self, image: np.ndarray) -> np.ndarray:
        box = Letterbox.fit(image.shape[0], image.shape[1], ENCODER_SIDE)
        canvas = _as_rgb(box.apply_image(image)).astype(np.float32) / 255.0
        gh, gw = self.grid
        # 518 = 37 * 14 exactly, so pooling windows tile the canvas
        patches = canvas.reshape(gh, ENCODER_PATCH, gw, ENCODER_PATCH, 3).mean(axis=(1, 3))
        ys, xs = np.meshgrid(
            np.linspace(0.0, 0.5, gh, dtype=np.float32),
            np.linspace(0.0, 0.5, gw, dtype=np.float32),
            indexing="ij",
        )
        # color and its complement together make intensity show up in
        # the feature direction, not just the norm; cosine matching is
        # blind to the norm
        stats = np.concatenate(
            [patches, 1.0 - patches, ys[..., None], xs[..., None]], axis=-1
        )
        return (stats.reshape(-1, 8) @ self._proj).reshape(gh, gw, self.dim)


class StubSegmenter:
    """Color-coherence region growing standing in for a mask decoder.

    Produces three candidate masks at increasing color tolerance
    (multimask analogue) and returns the best by a coverage/coherence
    score, mirroring highest-score selection. The logit for a pixel is
    tolerance minus color distance; the mask keeps logit > 0, which is
    the 0.0 threshold advertised in SEGMENTER_DEFAULTS.
    """

    TOLERANCES = (12.0, 28.0, 48.0)

    def segment(
        self, image: np.ndarray, points: list[tuple[float, float]]
    ) -> tuple[np.ndarray, float]:
        box = Letterbox.fit(image.shape[0], image.shape[1], SEGMENTER_SIDE)
        canvas = _as_rgb(box.apply_image(image)).astype(np.float32)
        seeds = []
        for x, y in points:
            cx, cy = box.point_to_canvas(x, y)
            col = min(max(int(round(cx)), 0), SEGMENTER_SIDE - 1)
            row = min(max(int(round(cy)), 0), SEGMENTER_SIDE - 1)
            seeds.append((row, col))
        seed_colors = np.array([canvas[r, c] for r, c in seeds])
        dist = np.linalg.norm(canvas - seed_colors.mean(axis=0), axis=-1)

        best_mask: Optional[np.ndarray] = None
        best_score = 0.0
        for tol in self.TOLERANCES:
            candidate = self._grow(dist <= tol, seeds)
            if not candidate.any():
                continue
            inside = sum(candidate[r, c] for r, c in seeds) / len(seeds)
            coherence = 1.0 / (1.0 + float(dist[candidate].mean()) / 16.0)
            score = inside * coherence
            if score > best_score:
                best_mask, best_score = candidate, score

        if best_mask is None:
            return np.zeros((image.shape[0], image.shape[1]), dtype=bool), 0.0
        return box.mask_to_original(best_mask), round(best_score, 6)

    @staticmethod
    def _grow(similar: np.ndarray, seeds: list[tuple[int, int]]) -> np.ndarray:
        labels, _ = ndimage.label(similar)
        hit = {labels[r, c] for r, c in seeds} - {0}
        if not hit:
            return np.zeros_like(similar)
        return np.isin(labels, sorted(hit))


def _load_hf_encoder(checkpoint: str, device: str) -> Encoder:
    try:
        import torch
        from transformers import AutoImageProcessor, AutoModel
    except ImportError as e:  # pragma: no cover - depends on extras
        raise CheckpointError(
            f"loading {checkpoint!r} needs the [models] extra (torch, transformers)"
        ) from e

    class HFEncoder:
        grid = (ENCODER_SIDE // ENCODER_PATCH, ENCODER_SIDE // ENCODER_PATCH)
        dim = 1024

        def __init__(self) -> None:
            self.processor = AutoImageProcessor.from_pretrained(checkpoint)
            self.model = AutoModel.from_pretrained(checkpoint).to(device).eval()

        def encode(self, image: np.ndarray) -> np.ndarray:
            box = Letterbox.fit(image.shape[0], image.shape[1], ENCODER_SIDE)
            canvas = _as_rgb(box.apply_image(image))
            inputs = self.processor(
                images=canvas,
                do_resize=False,
                do_center_crop=False,
                return_tensors="pt",
            ).to(device)
            with torch.inference_mode():
                out = self.model(**inputs).last_hidden_state[0]
            tokens = out[1:]  # drop CLS
            gh, gw = self.grid
            return tokens.reshape(gh, gw, -1).cpu().numpy().astype(np.float32)

    try:
        return HFEncoder()
    except Exception as e:
        raise CheckpointError(f"cannot load encoder {checkpoint!r}: {e}") from e


def _load_hf_segmenter(checkpoint: str, device: str) -> Segmenter:
    try:
        import torch
        from transformers import SamModel, SamProcessor
    except ImportError as e:  # pragma: no cover - depends on extras
        raise CheckpointError(
            f"loading {checkpoint!r} needs the [models] extra (torch, transformers)"
        ) from e

    class HFSegmenter:
        def __init__(self) -> None:
            self.processor = SamProcessor.from_pretrained(checkpoint)
            self.model = SamModel.from_pretrained(checkpoint).to(device).eval()

        def segment(
            self, image: np.ndarray, points: list[tuple[float, float]]
        ) -> tuple[np.ndarray, float]:
            rgb = _as_rgb(image)
            inputs = self.processor(
                images=rgb,
                input_points=[[list(p) for p in points]],
                return_tensors="pt",
            ).to(device)
            with torch.inference_mode():
                out = self.model(**inputs, multimask_output=True)
            masks = self.processor.image_processor.post_process_masks(
                out.pred_masks.cpu(),
                inputs["original_sizes"].cpu(),
                inputs["reshaped_input_sizes"].cpu(),
            )[0][0]
            scores = out.iou_scores[0, 0].cpu().numpy()
            best = int(scores.argmax())
            return masks[best].numpy().astype(bool), float(scores[best])

    try:
        return HFSegmenter()
    except Exception as e:
        raise CheckpointError(f"cannot load segmenter {checkpoint!r}: {e}") from e


def check_resolvable(encoder: str, segmenter: str) -> None:
    """Cheap pre-serve validation: ids known, heavyweight deps importable.

    Does not download or instantiate anything; real loading may still
    fail later (missing weights, bad checkpoint), which surfaces as a
    load error on the running server.
    """
    import importlib.util

    for role, checkpoint, stub_id in (
        ("encoder", encoder, STUB_ENCODER_ID),
        ("segmenter", segmenter, STUB_SEGMENTER_ID),
    ):
        if checkpoint.startswith("stub:"):
            if checkpoint != stub_id:
                raise CheckpointError(f"unknown stub {role} {checkpoint!r}")
        elif importlib.util.find_spec("transformers") is None:
            raise CheckpointError(
                f"{role} {checkpoint!r} needs the [models] extra (torch, transformers)"
            )


def resolve_encoder(checkpoint: str, device: str) -> Encoder:
    if checkpoint == STUB_ENCODER_ID:
        return StubEncoder()
    if checkpoint.startswith("stub:"):
        raise CheckpointError(f"unknown stub encoder {checkpoint!r}")
    return _load_hf_encoder(checkpoint, device)


def resolve_segmenter(checkpoint: str, device: str) -> Segmenter:
    if checkpoint == STUB_SEGMENTER_ID:
        return StubSegmenter()
    if checkpoint.startswith("stub:"):
        raise CheckpointError(f"unknown stub segmenter {checkpoint!r}")
    return _load_hf_segmenter(checkpoint, device)
