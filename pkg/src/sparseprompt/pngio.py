"""PNG readers and writers for images and masks.

Masks are single-channel 8-bit PNGs: 0 is background, any nonzero value
is foreground. Masks written by this package use 0/255. Images are 8-bit
PNGs, grayscale or RGB. All writes are atomic (temp file + rename).
"""

from __future__ import annotations

import io
import os
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image as PILImage

from .core import BinaryMask, Image

__all__ = [
    "load_image",
    "save_image",
    "load_mask",
    "save_mask",
    "image_to_png_bytes",
    "mask_to_png_bytes",
    "image_from_png_bytes",
    "mask_from_png_bytes",
    "atomic_write_bytes",
]

PathLike = Union[str, Path]


def atomic_write_bytes(data: bytes, path: PathLike) -> None:
    """Write ``data`` to ``path`` via a temp file in the same directory."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _decode(data: bytes) -> PILImage.Image:
    return PILImage.open(io.BytesIO(data))


def image_from_png_bytes(data: bytes) -> Image:
    pil = _decode(data)
    if pil.mode == "L":
        return Image(np.asarray(pil, dtype=np.uint8))
    if pil.mode == "RGB":
        return Image(np.asarray(pil, dtype=np.uint8))
    raise ValueError(f"expected an 8-bit grayscale or RGB PNG, got mode {pil.mode!r}")


def mask_from_png_bytes(data: bytes) -> BinaryMask:
    pil = _decode(data)
    if pil.mode != "L":
        raise ValueError(f"expected a single-channel 8-bit PNG mask, got mode {pil.mode!r}")
    return BinaryMask(np.asarray(pil, dtype=np.uint8) != 0)


def image_to_png_bytes(image: Image) -> bytes:
    pil = PILImage.fromarray(np.asarray(image.data))
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def mask_to_png_bytes(mask: BinaryMask) -> bytes:
    raster = np.where(mask.data, np.uint8(255), np.uint8(0))
    pil = PILImage.fromarray(raster, mode="L")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def load_image(path: PathLike) -> Image:
    return image_from_png_bytes(Path(path).read_bytes())


def save_image(image: Image, path: PathLike) -> None:
    atomic_write_bytes(image_to_png_bytes(image), path)


def load_mask(path: PathLike) -> BinaryMask:
    return mask_from_png_bytes(Path(path).read_bytes())


def save_mask(mask: BinaryMask, path: PathLike) -> None:
    atomic_write_bytes(mask_to_png_bytes(mask), path)
