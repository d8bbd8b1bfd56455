"""Letterbox geometry: models see fixed square canvases, callers never do.

The wire protocol promises original pixel coordinates both ways, so
every resize here must be exactly invertible at the bookkeeping level:
one scale factor, one centered padding offset, applied to points going
in and masks coming out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage


@dataclass(frozen=True)
class Letterbox:
    """Mapping between an (height, width) frame and a side x side canvas."""

    height: int
    width: int
    side: int
    scale: float
    resized_h: int
    resized_w: int
    pad_top: int
    pad_left: int

    @classmethod
    def fit(cls, height: int, width: int, side: int) -> "Letterbox":
        if height <= 0 or width <= 0:
            raise ValueError("image dimensions must be positive")
        scale = min(side / height, side / width)
        # at least one pixel per axis even for extreme aspect ratios
        resized_h = max(1, int(round(height * scale)))
        resized_w = max(1, int(round(width * scale)))
        return cls(
            height=height,
            width=width,
            side=side,
            scale=scale,
            resized_h=resized_h,
            resized_w=resized_w,
            pad_top=(side - resized_h) // 2,
            pad_left=(side - resized_w) // 2,
        )

    def apply_image(self, arr: np.ndarray, fill: int = 0) -> np.ndarray:
        """Resize (bilinear) onto the padded canvas; channel count preserved."""
        img = PILImage.fromarray(arr)
        img = img.resize((self.resized_w, self.resized_h), PILImage.BILINEAR)
        resized = np.asarray(img)
        shape = (self.side, self.side) + resized.shape[2:]
        canvas = np.full(shape, fill, dtype=resized.dtype)
        canvas[
            self.pad_top : self.pad_top + self.resized_h,
            self.pad_left : self.pad_left + self.resized_w,
        ] = resized
        return canvas

    def point_to_canvas(self, x: float, y: float) -> tuple[float, float]:
        return (x * self.scale + self.pad_left, y * self.scale + self.pad_top)

    def mask_to_original(self, canvas_mask: np.ndarray) -> np.ndarray:
        """Crop the padding, then nearest-resize back to the original frame."""
        crop = canvas_mask[
            self.pad_top : self.pad_top + self.resized_h,
            self.pad_left : self.pad_left + self.resized_w,
        ]
        img = PILImage.fromarray(crop.astype(np.uint8) * 255)
        img = img.resize((self.width, self.height), PILImage.NEAREST)
        return np.asarray(img) > 127
