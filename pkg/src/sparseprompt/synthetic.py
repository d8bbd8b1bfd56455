"""Seeded generation of synthetic episodes and manifest bundles.

Scenes are two-tone rectangles over a darker background with mild pixel
noise. Objects always contain the image center, keep a margin from the
border, and are at least as wide as the default refinement kernel, so a
perfect segmenter run ends at IoU exactly 1.0. Everything is a pure
function of the seed.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np

from .core import BinaryMask, Episode, Image
from .manifest import EpisodeRecord
from .pngio import atomic_write_bytes, save_image, save_mask

__all__ = ["make_scene", "make_records", "write_bundle"]

CLASS_CYCLE = ("block-a", "block-b", "block-c")

FG_GRAY = 200
BG_GRAY = 30
FG_RGB = (205, 175, 64)
BG_RGB = (32, 44, 120)
NOISE = 4


def _rect_bounds(rng: np.random.Generator, size: int) -> tuple[int, int, int, int]:
    # contains the center, margin >= 8, side in [32, 56]
    w = int(rng.integers(32, 57))
    h = int(rng.integers(32, 57))
    cx, cy = size // 2, size // 2
    x0 = cx - w // 2 + int(rng.integers(-6, 7))
    y0 = cy - h // 2 + int(rng.integers(-6, 7))
    return x0, y0, x0 + w, y0 + h


def make_scene(rng: np.random.Generator, size: int = 96, rgb: bool = False) -> tuple[Image, BinaryMask]:
    """One image with a bright rectangle on a dark ground, plus its mask."""
    x0, y0, x1, y1 = _rect_bounds(rng, size)
    mask = np.zeros((size, size), dtype=bool)
    mask[y0:y1, x0:x1] = True
    if rgb:
        img = np.empty((size, size, 3), dtype=np.int16)
        img[:] = BG_RGB
        img[mask] = FG_RGB
        noise = rng.integers(-NOISE, NOISE + 1, size=(size, size, 3), dtype=np.int16)
    else:
        img = np.full((size, size), BG_GRAY, dtype=np.int16)
        img[mask] = FG_GRAY
        noise = rng.integers(-NOISE, NOISE + 1, size=(size, size), dtype=np.int16)
    img = np.clip(img + noise, 0, 255).astype(np.uint8)
    return Image(img), BinaryMask(mask)


def make_records(n_episodes: int, seed: int = 7, size: int = 96) -> list[EpisodeRecord]:
    """Generate ``n_episodes`` in memory; every fourth episode is 2-shot."""
    rng = np.random.default_rng(seed)
    records = []
    for n in range(n_episodes):
        rgb = n % 3 == 2
        k = 2 if n % 4 == 3 else 1
        references = tuple(make_scene(rng, size, rgb) for _ in range(k))
        target_img, target_gt = make_scene(rng, size, rgb)
        records.append(
            EpisodeRecord(
                episode_id=f"ep{n:03d}",
                class_label=CLASS_CYCLE[n % len(CLASS_CYCLE)],
                episode=Episode(references=references, target=target_img, target_gt=target_gt),
            )
        )
    return records


def write_bundle(
    root: Union[str, Path],
    n_episodes: int = 24,
    seed: int = 7,
    size: int = 96,
    with_target_masks: bool = True,
) -> Path:
    """Write episodes plus ``manifest.json`` under ``root``; returns the manifest path."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for rec in make_records(n_episodes, seed=seed, size=size):
        ep_dir = root / rec.episode_id
        ep_dir.mkdir(parents=True, exist_ok=True)
        refs = []
        for i, (img, mask) in enumerate(rec.episode.references):
            save_image(img, ep_dir / f"ref{i}.png")
            save_mask(mask, ep_dir / f"ref{i}_mask.png")
            refs.append(
                {"image": f"{rec.episode_id}/ref{i}.png", "mask": f"{rec.episode_id}/ref{i}_mask.png"}
            )
        save_image(rec.episode.target, ep_dir / "target.png")
        target_entry = {"image": f"{rec.episode_id}/target.png", "mask": None}
        if with_target_masks and rec.episode.target_gt is not None:
            save_mask(rec.episode.target_gt, ep_dir / "target_mask.png")
            target_entry["mask"] = f"{rec.episode_id}/target_mask.png"
        entries.append(
            {
                "id": rec.episode_id,
                "class": rec.class_label,
                "references": refs,
                "target": target_entry,
            }
        )
    manifest_path = root / "manifest.json"
    payload = json.dumps({"episodes": entries}, indent=2, sort_keys=True) + "\n"
    atomic_write_bytes(payload.encode("ascii"), manifest_path)
    return manifest_path
