"""Side-by-side concatenation of key and query rasters and mask bookkeeping.

The key always occupies the left half, the query the right half. Stitching
never resamples: every output pixel equals exactly one input pixel, so a
query coordinate maps to the stitched frame by adding ``key_width`` to x.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import BinaryMask, RasterImage

__all__ = ["StitchLayout", "stitch", "stitch_masks", "split_mask"]


@dataclass(frozen=True)
class StitchLayout:
    """Geometry of a stitched frame: [0, key_width) is key, the rest query."""

    key_width: int
    total_width: int
    height: int

    def __post_init__(self) -> None:
        if not 0 < self.key_width < self.total_width:
            raise ValueError(
                f"key_width must satisfy 0 < key_width < total_width, "
                f"got key_width={self.key_width}, total_width={self.total_width}"
            )
        if self.height < 1:
            raise ValueError("height must be >= 1")

    @property
    def query_width(self) -> int:
        return self.total_width - self.key_width


def stitch(
    key: RasterImage, query: RasterImage, *, allow_width_mismatch: bool = False
) -> tuple[RasterImage, StitchLayout]:
    """Concatenate key and query horizontally into one image.

    Heights must match. Equal widths are enforced by default because prompt
    spatial bias may behave differently for asymmetric halves; pass
    ``allow_width_mismatch=True`` to stitch unequal widths anyway.
    """
    if key.height != query.height:
        raise ValueError(
            f"height mismatch: key is {key.height}, query is {query.height}"
        )
    if key.width != query.width and not allow_width_mismatch:
        raise ValueError(
            f"width mismatch: key is {key.width}, query is {query.width} "
            "(pass allow_width_mismatch=True to override)"
        )
    combined = np.concatenate([key.pixels, query.pixels], axis=1)
    layout = StitchLayout(
        key_width=key.width, total_width=key.width + query.width, height=key.height
    )
    return RasterImage(combined), layout


def stitch_masks(key_mask: BinaryMask, query_mask: BinaryMask) -> BinaryMask:
    """Concatenate two masks horizontally (key left, query right)."""
    if key_mask.height != query_mask.height:
        raise ValueError(
            f"height mismatch: key mask is {key_mask.height}, "
            f"query mask is {query_mask.height}"
        )
    return BinaryMask(np.concatenate([key_mask.values, query_mask.values], axis=1))


def split_mask(stitched: BinaryMask, layout: StitchLayout) -> tuple[BinaryMask, BinaryMask]:
    """Split a stitched-frame mask back into (key half, query half)."""
    if stitched.width != layout.total_width or stitched.height != layout.height:
        raise ValueError(
            f"mask is {stitched.width}x{stitched.height}, layout expects "
            f"{layout.total_width}x{layout.height}"
        )
    left = BinaryMask(stitched.values[:, : layout.key_width].copy())
    right = BinaryMask(stitched.values[:, layout.key_width :].copy())
    return left, right
