"""Ensembles of randomized segmentation runs and their aggregation.

One "run" samples a fresh prompt bundle and queries the backend once.
Repeating K times yields masks Y^1..Y^K with confidences c^1..c^K, which
are aggregated either by best selection (keep the highest-confidence run)
or by confidence-weighted majority voting:

    scores[p] = sum_i  c_i * [mask_i[p]]          (per-pixel weighted votes)
    tau       = sum_i  c_i / m                    (m > 0 is a hyperparameter)
    output[p] = scores[p] >= tau

Larger m lowers tau and keeps more pixels. Sums are accumulated in
confidence-sorted order so aggregation is bit-exactly invariant to run
ordering (plain float summation is not).
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .backends import BackendError, SegmentationRun, SegmenterBackend, segment
from .prompts import PromptBundle, PromptConfig, PromptStrategy, build_prompts
from .raster import BinaryMask, RasterImage
from .seeding import rng_for_run
from .stitching import StitchLayout

__all__ = [
    "EnsembleConfig",
    "EnsembleResult",
    "ScoreMap",
    "CwmvParams",
    "EnsembleRunError",
    "run_ensemble",
    "ensemble_bundles",
    "aggregate_best",
    "accumulate_cwmv",
    "cwmv_threshold",
    "aggregate_cwmv",
    "weighted_vote_scores",
    "vote_threshold",
    "weighted_vote_mask",
]


@dataclass(frozen=True)
class EnsembleConfig:
    runs: int
    master_seed: int
    strategy: PromptStrategy
    prompt_config: PromptConfig = field(default_factory=PromptConfig)

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise ValueError("an ensemble needs at least one run")
        if self.master_seed < 0:
            raise ValueError("master_seed must be >= 0")


@dataclass(frozen=True)
class EnsembleResult:
    """The K runs of one ensemble, in run-index order."""

    runs: tuple[SegmentationRun, ...]

    def __post_init__(self) -> None:
        if not self.runs:
            raise ValueError("ensemble result must contain at least one run")
        w, h = self.runs[0].mask.width, self.runs[0].mask.height
        for i, run in enumerate(self.runs):
            if run.mask.width != w or run.mask.height != h:
                raise ValueError(
                    f"run {i} mask is {run.mask.width}x{run.mask.height}, "
                    f"expected {w}x{h}"
                )

    @property
    def confidences(self) -> np.ndarray:
        return np.array([run.confidence for run in self.runs], dtype=float)

    def mask_stack(self) -> np.ndarray:
        return np.stack([run.mask.values for run in self.runs])


@dataclass(frozen=True)
class ScoreMap:
    """Per-pixel accumulated confidence from weighted voting."""

    scores: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.scores)
        if arr.ndim != 2:
            raise ValueError("ScoreMap.scores must be 2-dimensional")
        if arr.size and float(arr.min()) < 0.0:
            raise ValueError("ScoreMap.scores must be nonnegative")

    @property
    def width(self) -> int:
        return self.scores.shape[1]

    @property
    def height(self) -> int:
        return self.scores.shape[0]


@dataclass(frozen=True)
class CwmvParams:
    m: float = 4.0

    def __post_init__(self) -> None:
        if not self.m > 0:
            raise ValueError("m must be positive")


class EnsembleRunError(BackendError):
    """A backend failure during an ensemble, tagged with the failing run."""

    def __init__(self, run_index: int, cause: Exception):
        super().__init__(f"run {run_index} failed: {cause}")
        self.run_index = run_index


def ensemble_bundles(
    key_mask: BinaryMask, layout: StitchLayout, config: EnsembleConfig
) -> list[PromptBundle]:
    """Regenerate the exact prompt bundles an ensemble run uses.

    Pure and deterministic: run i draws from a generator derived from
    (master_seed, i) only.
    """
    return [
        build_prompts(
            config.strategy,
            key_mask,
            layout,
            config.prompt_config,
            rng_for_run(config.master_seed, i),
        )
        for i in range(config.runs)
    ]


def run_ensemble(
    backend: SegmenterBackend,
    stitched: RasterImage,
    key_mask: BinaryMask,
    layout: StitchLayout,
    config: EnsembleConfig,
    jobs: int = 1,
) -> EnsembleResult:
    """Execute K independent prompt-sample/segment runs.

    Results are returned in run-index order regardless of completion order.
    With ``jobs > 1`` runs execute concurrently unless the backend declares
    itself serial. Any backend error aborts the whole ensemble, wrapped in
    EnsembleRunError carrying the failing run index.
    """
    if stitched.width != layout.total_width or stitched.height != layout.height:
        raise ValueError(
            f"stitched image is {stitched.width}x{stitched.height}, layout expects "
            f"{layout.total_width}x{layout.height}"
        )
    bundles = ensemble_bundles(key_mask, layout, config)

    def one(i: int) -> SegmentationRun:
        try:
            return segment(backend, stitched, bundles[i])
        except Exception as exc:
            raise EnsembleRunError(i, exc) from exc

    if jobs > 1 and not backend.descriptor.serial:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(one, range(config.runs)))
    else:
        runs = [one(i) for i in range(config.runs)]
    return EnsembleResult(runs=tuple(runs))


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


def aggregate_best(result: EnsembleResult) -> SegmentationRun:
    """Keep only the run with the highest confidence (ties: lowest index)."""
    return result.runs[int(np.argmax(result.confidences))]


def weighted_vote_scores(masks: np.ndarray, confidences: np.ndarray) -> np.ndarray:
    """Per-pixel sum of confidences over the runs marking that pixel.

    Accumulation follows confidence-sorted order, which makes the result
    bit-exactly independent of run ordering.
    """
    masks = np.asarray(masks, dtype=bool)
    confidences = np.asarray(confidences, dtype=float)
    if masks.ndim != 3 or masks.shape[0] != confidences.shape[0]:
        raise ValueError("masks must be (K, H, W) with one confidence per run")
    scores = np.zeros(masks.shape[1:], dtype=float)
    for i in np.argsort(confidences, kind="stable"):
        scores[masks[i]] += confidences[i]
    return scores


def vote_threshold(confidences: np.ndarray, m: float) -> float:
    """tau = (sum of confidences) / m.

    The sum uses the same sequential sorted-order accumulation as the score
    map; mixing summation schemes would let a unanimous pixel's score land
    one ulp below tau.
    """
    if not m > 0:
        raise ValueError("m must be positive")
    total = 0.0
    for c in np.sort(np.asarray(confidences, dtype=float)):
        total += float(c)
    return total / m


def weighted_vote_mask(masks: np.ndarray, confidences: np.ndarray, m: float) -> np.ndarray:
    """Threshold the vote scores at tau.

    When every confidence is zero, tau is zero and the comparison would mark
    every pixel foreground; that degenerate ensemble conveys no information,
    so the output is all-background instead.
    """
    scores = weighted_vote_scores(masks, confidences)
    tau = vote_threshold(confidences, m)
    if tau == 0.0:
        return np.zeros_like(scores, dtype=bool)
    return scores >= tau


def accumulate_cwmv(result: EnsembleResult) -> ScoreMap:
    """Accumulate per-pixel weighted votes for an ensemble."""
    return ScoreMap(weighted_vote_scores(result.mask_stack(), result.confidences))


def cwmv_threshold(result: EnsembleResult, params: CwmvParams) -> float:
    return vote_threshold(result.confidences, params.m)


def aggregate_cwmv(result: EnsembleResult, params: CwmvParams) -> BinaryMask:
    """Confidence-weighted majority vote over an ensemble's runs."""
    return BinaryMask(
        weighted_vote_mask(result.mask_stack(), result.confidences, params.m)
    )
