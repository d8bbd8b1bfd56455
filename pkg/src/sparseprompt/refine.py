"""Binary morphology for mask cleanup: open-then-close with a small kernel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

from .core import BinaryMask

__all__ = [
    "StructuringElement",
    "DEFAULT_KERNEL",
    "erode",
    "dilate",
    "open_mask",
    "close_mask",
    "refine_mask",
]

_SHAPES = ("square", "disk")


@dataclass(frozen=True)
class StructuringElement:
    """Symmetric structuring element: ``square`` (side 2r+1) or ``disk``."""

    shape: str = "square"
    radius: int = 2

    def __post_init__(self) -> None:
        if self.shape not in _SHAPES:
            raise ValueError(f"shape must be one of {_SHAPES}, got {self.shape!r}")
        if self.radius < 1:
            raise ValueError(f"radius must be >= 1, got {self.radius}")

    def footprint(self) -> np.ndarray:
        r = self.radius
        if self.shape == "square":
            return np.ones((2 * r + 1, 2 * r + 1), dtype=bool)
        dy, dx = np.mgrid[-r : r + 1, -r : r + 1]
        return dy * dy + dx * dx <= r * r


DEFAULT_KERNEL = StructuringElement(shape="square", radius=2)


def erode(mask: BinaryMask, kernel: StructuringElement, *, border_foreground: bool = False) -> BinaryMask:
    """Foreground survives only where the whole kernel sits on foreground.

    Out-of-bounds pixels count as background by default, so foreground
    touching the raster border is eaten. ``border_foreground=True`` flips
    that convention (used when checking erode/dilate duality through
    complements).
    """
    out = ndi.binary_erosion(
        mask.data, structure=kernel.footprint(), border_value=1 if border_foreground else 0
    )
    return BinaryMask(out)


def dilate(mask: BinaryMask, kernel: StructuringElement, *, border_foreground: bool = False) -> BinaryMask:
    """Foreground spreads to every pixel the kernel can reach from it."""
    out = ndi.binary_dilation(
        mask.data, structure=kernel.footprint(), border_value=1 if border_foreground else 0
    )
    return BinaryMask(out)


def open_mask(mask: BinaryMask, kernel: StructuringElement) -> BinaryMask:
    """Erosion then dilation: removes specks and thin protrusions; never grows."""
    return dilate(erode(mask, kernel), kernel)


def close_mask(mask: BinaryMask, kernel: StructuringElement) -> BinaryMask:
    """Dilation then erosion: fills small gaps and holes; never shrinks.

    Computed on a background-padded canvas (pad width = kernel radius) so
    the result equals closing on an unbounded background plane. A raw
    raster-local erosion pass would eat foreground that touches the
    border and break the ``mask subset-of close(mask)`` law.
    """
    r = kernel.radius
    padded = np.pad(mask.data, r, mode="constant", constant_values=False)
    closed = ndi.binary_closing(padded, structure=kernel.footprint())
    return BinaryMask(closed[r:-r, r:-r])


def refine_mask(mask: BinaryMask, kernel: StructuringElement = DEFAULT_KERNEL) -> BinaryMask:
    """Open then close: drop speckle, then seal pinholes. Idempotent."""
    return close_mask(open_mask(mask, kernel), kernel)
