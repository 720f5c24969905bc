"""Qualitative overlay rendering: predicted foreground tint + prompt points."""
from __future__ import annotations

from typing import Iterable

import numpy as np

from .prompts import PointLabel, PromptBundle
from .raster import BinaryMask, RasterImage

__all__ = ["render_overlay"]

TINT = np.array([60, 140, 255], dtype=float)  # predicted-foreground highlight
POSITIVE_COLOR = np.array([0, 200, 0], dtype=np.uint8)
NEGATIVE_COLOR = np.array([220, 0, 0], dtype=np.uint8)
POINT_RADIUS = 2


def render_overlay(
    image: RasterImage,
    predicted: BinaryMask,
    bundles: Iterable[PromptBundle] = (),
) -> RasterImage:
    """Tint predicted foreground and draw prompt points.

    Positive prompts are green, negative prompts red, matching the usual
    promptable-segmenter visualization convention.
    """
    if predicted.width != image.width or predicted.height != image.height:
        raise ValueError("prediction and image dimensions differ")
    out = np.asarray(image.pixels, dtype=float).copy()
    fg = predicted.values
    out[fg] = 0.45 * out[fg] + 0.55 * TINT
    out = out.round().astype(np.uint8)
    for bundle in bundles:
        for point in bundle.points:
            color = (
                POSITIVE_COLOR if point.label is PointLabel.POSITIVE else NEGATIVE_COLOR
            )
            x, y = point.location
            y0, y1 = max(0, y - POINT_RADIUS), min(image.height, y + POINT_RADIUS + 1)
            x0, x1 = max(0, x - POINT_RADIUS), min(image.width, x + POINT_RADIUS + 1)
            out[y0:y1, x0:x1] = color
    return RasterImage(out)
