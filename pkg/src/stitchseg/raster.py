"""Value types for RGB rasters and binary masks, plus lossless PNG I/O.

Coordinate convention: origin at the top-left corner, x grows rightward
(columns), y grows downward (rows). Arrays are row-major, indexed [y, x].
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from PIL import Image, UnidentifiedImageError

__all__ = [
    "RasterImage",
    "BinaryMask",
    "PixelCoord",
    "load_image",
    "load_mask",
    "save_image",
    "save_mask",
]


class PixelCoord(NamedTuple):
    """A pixel location: x is the column index, y the row index."""

    x: int
    y: int


@dataclass(frozen=True)
class RasterImage:
    """An RGB image with 8-bit channels, stored as a (height, width, 3) array."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.pixels)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError("RasterImage.pixels must have shape (height, width, 3)")
        if arr.dtype != np.uint8:
            raise ValueError("RasterImage.pixels must be uint8")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("RasterImage must be at least 1x1")
        view = arr.view()
        view.setflags(write=False)  # values are treated as immutable after construction
        object.__setattr__(self, "pixels", view)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class BinaryMask:
    """A per-pixel boolean map; True marks the target class."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values)
        if arr.ndim != 2:
            raise ValueError("BinaryMask.values must have shape (height, width)")
        if arr.dtype != np.bool_:
            raise ValueError("BinaryMask.values must be boolean")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("BinaryMask must be at least 1x1")
        view = arr.view()
        view.setflags(write=False)
        object.__setattr__(self, "values", view)

    @classmethod
    def filled(cls, width: int, height: int, value: bool = False) -> "BinaryMask":
        return cls(np.full((height, width), value, dtype=bool))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def foreground_count(self) -> int:
        return int(np.count_nonzero(self.values))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.values.shape == other.values.shape and bool(
            np.array_equal(self.values, other.values)
        )

    def __hash__(self) -> int:  # frozen dataclass with array field
        return hash((self.values.shape, self.values.tobytes()))


def _open_raster(path: str | Path) -> Image.Image:
    """Open a raster file, rejecting bit depths deeper than 8 bits per channel.

    Pillow silently narrows 16-bit RGB PNGs to 8 bits, so for PNG files the
    declared bit depth is read from the IHDR chunk before decoding.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(26)
    if head[:8] == b"\x89PNG\r\n\x1a\n":
        if len(head) < 26:
            raise ValueError(f"corrupt PNG stream: {path}")
        bit_depth = head[24]
        if bit_depth > 8:
            raise ValueError(
                f"unsupported bit depth {bit_depth} in {path}: only 8-bit rasters are accepted"
            )
    try:
        img = Image.open(path)
        img.load()
    except UnidentifiedImageError as exc:
        raise ValueError(f"not a decodable raster: {path}") from exc
    if img.mode in ("I", "I;16", "I;16B", "I;16L", "I;16N", "F"):
        raise ValueError(
            f"unsupported bit depth in {path}: only 8-bit rasters are accepted"
        )
    return img


def load_image(path: str | Path) -> RasterImage:
    """Decode a lossless raster into an RGB image.

    Grayscale and palette images are promoted to RGB by channel replication /
    palette expansion; an alpha channel, if present, is dropped. Sources
    deeper than 8 bits per channel are rejected rather than truncated.
    """
    img = _open_raster(path)
    rgb = img.convert("RGB")
    return RasterImage(np.asarray(rgb, dtype=np.uint8))


def load_mask(path: str | Path) -> BinaryMask:
    """Decode a raster into a binary mask: any nonzero pixel is foreground.

    The nonzero rule is robust to ground truth that encodes classes as
    colors; multi-class truth must be binarized upstream. Alpha channels are
    ignored.
    """
    img = _open_raster(path)
    arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return BinaryMask(arr.any(axis=2))


def save_image(image: RasterImage, path: str | Path) -> None:
    """Write an RGB image as PNG."""
    Image.fromarray(np.asarray(image.pixels)).save(path, format="PNG")


def save_mask(mask: BinaryMask, path: str | Path) -> None:
    """Write a mask as a single-channel PNG: foreground 255, background 0.

    Round-trips exactly through :func:`load_mask`.
    """
    data = np.where(mask.values, np.uint8(255), np.uint8(0))
    Image.fromarray(data, mode="L").save(path, format="PNG")
