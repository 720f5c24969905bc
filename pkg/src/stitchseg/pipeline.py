"""End-to-end prediction for one key/query pair.

This is the stage shared by the CLI and the batch harness. It deliberately
has no access to any query ground truth: it sees only the key image, the
key mask, and the query image, which rules out label leakage structurally.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .backends import SegmenterBackend
from .ensemble import (
    CwmvParams,
    EnsembleConfig,
    EnsembleResult,
    aggregate_best,
    aggregate_cwmv,
    run_ensemble,
)
from .morphology import StructuringElement, close
from .prompts import PromptConfig, PromptStrategy
from .raster import BinaryMask, RasterImage
from .stitching import StitchLayout, split_mask, stitch, stitch_masks

__all__ = [
    "Aggregator",
    "RAW",
    "PROCESSED",
    "VARIANTS",
    "PredictionConfig",
    "CellPrediction",
    "ScenePrediction",
    "predict_scene",
]


class Aggregator(Enum):
    BEST = "best"
    CWMV = "cwmv"


RAW = "raw"
PROCESSED = "processed"
VARIANTS = (RAW, PROCESSED)


@dataclass(frozen=True)
class PredictionConfig:
    """Resolved knobs for a prediction run (and for whole evaluations)."""

    strategies: tuple[PromptStrategy, ...] = tuple(PromptStrategy)
    aggregators: tuple[Aggregator, ...] = (Aggregator.BEST, Aggregator.CWMV)
    runs: int = 16
    master_seed: int = 0
    prompts: PromptConfig = field(default_factory=PromptConfig)
    cwmv_m: float = 4.0
    close_side: int = 5
    close_after_split: bool = False
    jobs: int = 1
    allow_width_mismatch: bool = False

    def __post_init__(self) -> None:
        if not self.strategies:
            raise ValueError("at least one strategy required")
        if not self.aggregators:
            raise ValueError("at least one aggregator required")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        # remaining fields are validated by the component types below
        EnsembleConfig(
            runs=self.runs,
            master_seed=self.master_seed,
            strategy=self.strategies[0],
            prompt_config=self.prompts,
        )
        CwmvParams(m=self.cwmv_m)
        StructuringElement(side=self.close_side)


@dataclass(frozen=True)
class CellPrediction:
    """Predicted query-half masks for one (strategy, aggregator) cell."""

    query_raw: BinaryMask
    query_processed: BinaryMask
    stitched_raw: BinaryMask
    stitched_processed: BinaryMask

    def query(self, variant: str) -> BinaryMask:
        return self.query_raw if variant == RAW else self.query_processed


@dataclass(frozen=True)
class ScenePrediction:
    stitched: RasterImage
    layout: StitchLayout
    cells: dict[tuple[PromptStrategy, Aggregator], CellPrediction]
    ensembles: dict[PromptStrategy, EnsembleResult]


def _postprocess(
    stitched_mask: BinaryMask, layout: StitchLayout, config: PredictionConfig
) -> tuple[BinaryMask, BinaryMask, BinaryMask]:
    """Return (query_raw, query_processed, stitched_processed)."""
    se = StructuringElement(side=config.close_side)
    key_raw, query_raw = split_mask(stitched_mask, layout)
    if config.close_after_split:
        query_processed = close(query_raw, se)
        stitched_processed = stitch_masks(close(key_raw, se), query_processed)
    else:
        # default: close the full stitched mask, then split; foreground near
        # the seam may bleed across halves within side-1 pixels
        stitched_processed = close(stitched_mask, se)
        _, query_processed = split_mask(stitched_processed, layout)
    return query_raw, query_processed, stitched_processed


def predict_scene(
    backend: SegmenterBackend,
    key_image: RasterImage,
    key_mask: BinaryMask,
    query_image: RasterImage,
    config: PredictionConfig,
) -> ScenePrediction:
    """Stitch, run one ensemble per strategy, and aggregate every cell.

    Deterministic for a fixed master seed against a deterministic backend;
    strategies share per-run seeds, so strategies that extend one another
    draw identical points for the shared groups.
    """
    if key_mask.width != key_image.width or key_mask.height != key_image.height:
        raise ValueError(
            f"key mask is {key_mask.width}x{key_mask.height}, key image is "
            f"{key_image.width}x{key_image.height}"
        )
    stitched, layout = stitch(
        key_image, query_image, allow_width_mismatch=config.allow_width_mismatch
    )
    cells: dict[tuple[PromptStrategy, Aggregator], CellPrediction] = {}
    ensembles: dict[PromptStrategy, EnsembleResult] = {}
    for strategy in config.strategies:
        ensemble_config = EnsembleConfig(
            runs=config.runs,
            master_seed=config.master_seed,
            strategy=strategy,
            prompt_config=config.prompts,
        )
        result = run_ensemble(
            backend, stitched, key_mask, layout, ensemble_config, jobs=config.jobs
        )
        ensembles[strategy] = result
        for aggregator in config.aggregators:
            if aggregator is Aggregator.BEST:
                stitched_raw = aggregate_best(result).mask
            else:
                stitched_raw = aggregate_cwmv(result, CwmvParams(m=config.cwmv_m))
            query_raw, query_processed, stitched_processed = _postprocess(
                stitched_raw, layout, config
            )
            cells[(strategy, aggregator)] = CellPrediction(
                query_raw=query_raw,
                query_processed=query_processed,
                stitched_raw=stitched_raw,
                stitched_processed=stitched_processed,
            )
    return ScenePrediction(
        stitched=stitched, layout=layout, cells=cells, ensembles=ensembles
    )
