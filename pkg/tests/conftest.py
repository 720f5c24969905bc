from __future__ import annotations

import numpy as np
import pytest

from stitchseg.raster import BinaryMask, RasterImage


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240813)


def random_mask(rng: np.random.Generator, width: int, height: int, p: float = 0.4) -> BinaryMask:
    return BinaryMask(rng.random((height, width)) < p)


def random_image(rng: np.random.Generator, width: int, height: int) -> RasterImage:
    return RasterImage(rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8))
