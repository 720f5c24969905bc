"""Binary morphology used to merge spatially close blobs in voted masks.

Closing = dilation followed by erosion with the same structuring element.
Pixels outside the image are treated as background for both operations, so
border pixels erode; this keeps results bit-reproducible across platforms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .raster import BinaryMask

__all__ = ["StructuringElement", "dilate", "erode", "close"]


@dataclass(frozen=True)
class StructuringElement:
    """A centered square window; the side must be odd."""

    side: int = 5
    shape: str = "square"

    def __post_init__(self) -> None:
        if self.shape != "square":
            raise ValueError(f"unsupported structuring element shape: {self.shape!r}")
        if self.side < 1 or self.side % 2 == 0:
            raise ValueError(f"side must be an odd count >= 1, got {self.side}")

    def footprint(self) -> np.ndarray:
        return np.ones((self.side, self.side), dtype=bool)


def dilate(mask: BinaryMask, se: StructuringElement) -> BinaryMask:
    """A pixel turns on iff any input foreground lies in its window."""
    out = ndimage.binary_dilation(mask.values, structure=se.footprint(), border_value=0)
    return BinaryMask(out)


def erode(mask: BinaryMask, se: StructuringElement) -> BinaryMask:
    """A pixel survives iff its whole window is foreground; windows that
    cross the border fail (outside counts as background)."""
    out = ndimage.binary_erosion(mask.values, structure=se.footprint(), border_value=0)
    return BinaryMask(out)


def close(mask: BinaryMask, se: StructuringElement) -> BinaryMask:
    """Morphological closing: fills gaps narrower than the window."""
    return erode(dilate(mask, se), se)
