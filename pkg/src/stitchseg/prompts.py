"""Automatic prompt generation for a promptable segmenter.

Four techniques, all operating in the stitched frame:

* ``KEY_ONLY``: positive and negative points sampled from the labeled key
  half only. Always correct, but prone to spatial bias — the segmenter can
  conclude the target only occurs in the key half.
* ``KEY_AND_QUERY``: the key points plus one or more "blind" positives
  sampled uniformly from the query half. Blind positives may or may not
  actually lie on the target; the ensemble stage compensates.
* ``NEGATIVE_KEY``: only negative points from the key (no key positives)
  plus blind query positives.
* ``MASKED_KEY``: ``KEY_AND_QUERY`` plus a mask prompt, built from the key
  mask stitched to an all-background query half.

Key-half samples are always consistent with the key mask; query-half
positives are drawn uniformly over all query pixels with no heuristic.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import NamedTuple

import numpy as np

from .raster import BinaryMask, PixelCoord
from .stitching import StitchLayout, stitch_masks

__all__ = [
    "PointLabel",
    "PointPrompt",
    "PromptBundle",
    "PromptStrategy",
    "PromptConfig",
    "sample_points",
    "build_prompts",
]


class PointLabel(IntEnum):
    """Point polarity; the integer values match the wire protocol."""

    NEGATIVE = 0
    POSITIVE = 1


class PointPrompt(NamedTuple):
    location: PixelCoord  # stitched-frame coordinates
    label: PointLabel


@dataclass(frozen=True)
class PromptBundle:
    """One run's prompt set: labeled points plus an optional mask prompt."""

    points: tuple[PointPrompt, ...]
    mask_prompt: BinaryMask | None = None

    def __post_init__(self) -> None:
        if len(self.points) < 1:
            raise ValueError("a prompt bundle needs at least one point")

    @property
    def positives(self) -> tuple[PointPrompt, ...]:
        return tuple(p for p in self.points if p.label is PointLabel.POSITIVE)

    @property
    def negatives(self) -> tuple[PointPrompt, ...]:
        return tuple(p for p in self.points if p.label is PointLabel.NEGATIVE)


class PromptStrategy(Enum):
    KEY_ONLY = "key-only"
    KEY_AND_QUERY = "key-and-query"
    NEGATIVE_KEY = "negative-key"
    MASKED_KEY = "masked-key"

    @property
    def ordinal(self) -> int:
        """Stable 1-based position used for report rows ("Prompt 1".."Prompt 4")."""
        return list(PromptStrategy).index(self) + 1

    @property
    def uses_query_positives(self) -> bool:
        return self is not PromptStrategy.KEY_ONLY

    @property
    def uses_key_positives(self) -> bool:
        return self is not PromptStrategy.NEGATIVE_KEY

    @property
    def uses_mask_prompt(self) -> bool:
        return self is PromptStrategy.MASKED_KEY


@dataclass(frozen=True)
class PromptConfig:
    """Point counts per run; the defaults mirror a handful of key points and
    a single blind query positive."""

    n_pos_key: int = 3
    n_neg_key: int = 3
    n_pos_query: int = 1

    def __post_init__(self) -> None:
        if min(self.n_pos_key, self.n_neg_key, self.n_pos_query) < 0:
            raise ValueError("prompt counts must be >= 0")


def sample_points(
    mask: BinaryMask, want_foreground: bool, n: int, rng: np.random.Generator
) -> list[PixelCoord]:
    """Sample ``n`` distinct pixel coordinates of the requested class.

    Sampling is without replacement so duplicate points cannot carry hidden
    weight. Deterministic for a given generator state.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    flat = np.flatnonzero(mask.values == want_foreground)
    kind = "foreground" if want_foreground else "background"
    if flat.size < n:
        raise ValueError(
            f"no {kind} to sample: need {n} distinct {kind} pixels, mask has {flat.size}"
        )
    chosen = rng.choice(flat, size=n, replace=False)
    w = mask.width
    return [PixelCoord(int(i % w), int(i // w)) for i in chosen]


def _blind_query_points(
    layout: StitchLayout, n: int, rng: np.random.Generator
) -> list[PixelCoord]:
    """Uniform draws over all query-half pixels, offset into the stitched frame."""
    total = layout.query_width * layout.height
    if total < n:
        raise ValueError(
            f"query half has {total} pixels, cannot sample {n} distinct points"
        )
    chosen = rng.choice(total, size=n, replace=False)
    w = layout.query_width
    return [
        PixelCoord(int(i % w) + layout.key_width, int(i // w)) for i in chosen
    ]


def build_prompts(
    strategy: PromptStrategy,
    key_mask: BinaryMask,
    layout: StitchLayout,
    config: PromptConfig,
    rng: np.random.Generator,
) -> PromptBundle:
    """Build one run's prompt bundle in stitched-frame coordinates.

    Key positives land on key-mask foreground and key negatives on key-mask
    background (so they are always correct); blind query positives are
    uniform over the query half. Identical inputs and generator seed yield
    an identical bundle.
    """
    if key_mask.width != layout.key_width or key_mask.height != layout.height:
        raise ValueError(
            f"key mask is {key_mask.width}x{key_mask.height}, layout expects "
            f"{layout.key_width}x{layout.height}"
        )
    if strategy.uses_key_positives and config.n_pos_key < 1:
        raise ValueError(f"{strategy.value} requires n_pos_key >= 1")
    if config.n_neg_key < 1:
        raise ValueError(f"{strategy.value} requires n_neg_key >= 1")
    if strategy.uses_query_positives and config.n_pos_query < 1:
        raise ValueError(f"{strategy.value} requires n_pos_query >= 1")

    points: list[PointPrompt] = []
    if strategy.uses_key_positives:
        for coord in sample_points(key_mask, True, config.n_pos_key, rng):
            points.append(PointPrompt(coord, PointLabel.POSITIVE))
    for coord in sample_points(key_mask, False, config.n_neg_key, rng):
        points.append(PointPrompt(coord, PointLabel.NEGATIVE))
    if strategy.uses_query_positives:
        for coord in _blind_query_points(layout, config.n_pos_query, rng):
            points.append(PointPrompt(coord, PointLabel.POSITIVE))

    mask_prompt = None
    if strategy.uses_mask_prompt:
        query_zeros = BinaryMask.filled(layout.query_width, layout.height, False)
        mask_prompt = stitch_masks(key_mask, query_zeros)
    return PromptBundle(points=tuple(points), mask_prompt=mask_prompt)
