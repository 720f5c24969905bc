"""Batch evaluation over a scene manifest.

The manifest is a CSV with header
``scene_id,key_image,key_mask,query_image,query_truth``. Each scene is
predicted independently, scored by intersection-over-union on the query
half only (the key half's mask is known, so its quality is irrelevant),
and aggregated into a strategy x aggregator x {raw, processed} matrix.

Per-scene seeds derive from (master_seed, scene_id), so results do not
depend on manifest ordering or concurrency, and a report is reproducible
from its configuration echo alone.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .backends import MockSegmenter, SegmenterBackend
from .pipeline import (
    PROCESSED,
    RAW,
    VARIANTS,
    Aggregator,
    PredictionConfig,
    predict_scene,
)
from .prompts import PromptStrategy
from .raster import BinaryMask, RasterImage, load_image, load_mask
from .seeding import derive_seed
from .stitching import stitch_masks

__all__ = [
    "iou",
    "SceneRecord",
    "LoadedScene",
    "IoUReport",
    "ManifestReport",
    "CellKey",
    "BackendFactory",
    "read_manifest",
    "mock_backend_factory",
    "evaluate_scene",
    "evaluate_manifest",
    "write_report_csv",
    "write_summary_csv",
    "format_matrix",
]

MANIFEST_FIELDS = ("scene_id", "key_image", "key_mask", "query_image", "query_truth")

CellKey = tuple[PromptStrategy, Aggregator, str]


def iou(truth: BinaryMask, predicted: BinaryMask) -> float:
    """Foreground intersection-over-union.

    Defined as 1.0 when both masks are empty: predicting absence perfectly
    is a perfect score, and the ratio is otherwise 0/0.
    """
    if truth.width != predicted.width or truth.height != predicted.height:
        raise ValueError(
            f"truth is {truth.width}x{truth.height}, "
            f"predicted is {predicted.width}x{predicted.height}"
        )
    intersection = int(np.count_nonzero(truth.values & predicted.values))
    union = int(np.count_nonzero(truth.values | predicted.values))
    if union == 0:
        return 1.0
    return intersection / union


@dataclass(frozen=True)
class SceneRecord:
    """One manifest row: a key pair, a query image, and the query truth."""

    scene_id: str
    key_image: Path
    key_mask: Path
    query_image: Path
    query_truth: Path

    def __post_init__(self) -> None:
        if not self.scene_id:
            raise ValueError("scene_id must be nonempty")
        paths = [self.key_image, self.key_mask, self.query_image, self.query_truth]
        if len({str(p) for p in paths}) != 4:
            raise ValueError(f"scene {self.scene_id}: the four paths must be distinct")


@dataclass(frozen=True)
class LoadedScene:
    record: SceneRecord
    key_image: RasterImage
    key_mask: BinaryMask
    query_image: RasterImage
    query_truth: BinaryMask


BackendFactory = Callable[[LoadedScene], SegmenterBackend]


def mock_backend_factory(scene: LoadedScene) -> MockSegmenter:
    """Mock oracle for a scene: its truth is the stitched key+query truth."""
    return MockSegmenter(stitch_masks(scene.key_mask, scene.query_truth))


def read_manifest(path: str | Path) -> list[SceneRecord]:
    """Parse and validate a manifest CSV; relative paths resolve against it."""
    path = Path(path)
    base = path.parent
    records: list[SceneRecord] = []
    seen: set[str] = set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != MANIFEST_FIELDS:
            raise ValueError(
                f"manifest header must be {','.join(MANIFEST_FIELDS)}, "
                f"got {reader.fieldnames}"
            )
        for row in reader:
            scene_id = row["scene_id"].strip()
            if scene_id in seen:
                raise ValueError(f"duplicate scene_id in manifest: {scene_id!r}")
            seen.add(scene_id)
            records.append(
                SceneRecord(
                    scene_id=scene_id,
                    key_image=base / row["key_image"],
                    key_mask=base / row["key_mask"],
                    query_image=base / row["query_image"],
                    query_truth=base / row["query_truth"],
                )
            )
    if not records:
        raise ValueError(f"manifest {path} contains no scenes")
    return records


def load_scene(
    record: SceneRecord, shared_key: tuple[Path, Path] | None = None
) -> LoadedScene:
    key_image_path, key_mask_path = (
        shared_key if shared_key is not None else (record.key_image, record.key_mask)
    )
    return LoadedScene(
        record=record,
        key_image=load_image(key_image_path),
        key_mask=load_mask(key_mask_path),
        query_image=load_image(record.query_image),
        query_truth=load_mask(record.query_truth),
    )


@dataclass(frozen=True)
class CellScore:
    iou: float
    intersection: int
    union: int


def evaluate_scene(
    backend: SegmenterBackend | BackendFactory,
    record: SceneRecord,
    config: PredictionConfig,
    *,
    shared_key: tuple[Path, Path] | None = None,
) -> dict[CellKey, CellScore]:
    """Run the pipeline on one scene and score every requested cell.

    The query truth is loaded here, after prediction is delegated to the
    truth-blind pipeline stage, and compared against the query half of each
    cell's raw and processed masks. The scene's ensemble seed derives from
    (master_seed, scene_id).
    """
    scene = load_scene(record, shared_key)
    scene_backend = backend(scene) if callable(backend) else backend
    scene_config = _with_scene_seed(config, record.scene_id)
    prediction = predict_scene(
        scene_backend, scene.key_image, scene.key_mask, scene.query_image, scene_config
    )
    scores: dict[CellKey, CellScore] = {}
    for (strategy, aggregator), cell in prediction.cells.items():
        for variant in VARIANTS:
            predicted = cell.query(variant)
            scores[(strategy, aggregator, variant)] = CellScore(
                iou=iou(scene.query_truth, predicted),
                intersection=int(
                    np.count_nonzero(scene.query_truth.values & predicted.values)
                ),
                union=int(
                    np.count_nonzero(scene.query_truth.values | predicted.values)
                ),
            )
    return scores


def _with_scene_seed(config: PredictionConfig, scene_id: str) -> PredictionConfig:
    return replace(config, master_seed=derive_seed(config.master_seed, scene_id))


@dataclass(frozen=True)
class IoUReport:
    """Per-scene and mean IoU for one (strategy, aggregator, variant) cell."""

    per_scene: Mapping[str, float]
    mean_iou: float
    config_echo: Mapping[str, object]
    pooled_iou: float | None = None

    def __post_init__(self) -> None:
        values = list(self.per_scene.values())
        if values:
            mean = sum(values) / len(values)
            if abs(mean - self.mean_iou) > 1e-12:
                raise ValueError("mean_iou must equal the mean of per-scene values")
        for v in values:
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"IoU {v} outside [0, 1]")


@dataclass(frozen=True)
class ManifestReport:
    cells: Mapping[CellKey, IoUReport]
    scene_order: tuple[str, ...]
    n_scenes: int
    failures: Mapping[str, str] = field(default_factory=dict)

    @property
    def n_failures(self) -> int:
        return len(self.failures)


def config_echo(config: PredictionConfig, backend_label: str) -> dict[str, object]:
    """A JSON-serializable echo of everything needed to reproduce a run."""
    return {
        "backend": backend_label,
        "strategies": [s.value for s in config.strategies],
        "aggregators": [a.value for a in config.aggregators],
        "runs": config.runs,
        "master_seed": config.master_seed,
        "n_pos_key": config.prompts.n_pos_key,
        "n_neg_key": config.prompts.n_neg_key,
        "n_pos_query": config.prompts.n_pos_query,
        "cwmv_m": config.cwmv_m,
        "close_side": config.close_side,
        "close_after_split": config.close_after_split,
        "jobs": config.jobs,
    }


def evaluate_manifest(
    backend: SegmenterBackend | BackendFactory,
    records: Sequence[SceneRecord],
    config: PredictionConfig,
    *,
    shared_key: tuple[Path, Path] | None = None,
    pooled: bool = False,
    backend_label: str = "",
) -> ManifestReport:
    """Evaluate every scene and aggregate per-cell reports.

    A failing scene (unreadable file, backend error) is recorded and
    excluded from the means; if every scene fails, the evaluation errors.
    """
    if not records:
        raise ValueError("no scenes to evaluate")
    echo = config_echo(config, backend_label)
    per_cell: dict[CellKey, dict[str, float]] = {}
    per_cell_counts: dict[CellKey, list[tuple[int, int]]] = {}
    failures: dict[str, str] = {}
    succeeded: list[str] = []
    for record in records:
        try:
            scores = evaluate_scene(backend, record, config, shared_key=shared_key)
        except Exception as exc:
            failures[record.scene_id] = str(exc)
            continue
        succeeded.append(record.scene_id)
        for cell_key, score in scores.items():
            per_cell.setdefault(cell_key, {})[record.scene_id] = score.iou
            per_cell_counts.setdefault(cell_key, []).append(
                (score.intersection, score.union)
            )
    if not succeeded:
        raise RuntimeError(
            f"all {len(records)} scenes failed; first error: "
            f"{next(iter(failures.values()))}"
        )
    cells: dict[CellKey, IoUReport] = {}
    for cell_key, scene_ious in per_cell.items():
        pooled_iou = None
        if pooled:
            inter = sum(i for i, _ in per_cell_counts[cell_key])
            union = sum(u for _, u in per_cell_counts[cell_key])
            pooled_iou = 1.0 if union == 0 else inter / union
        cells[cell_key] = IoUReport(
            per_scene=dict(scene_ious),
            mean_iou=sum(scene_ious.values()) / len(scene_ious),
            config_echo=echo,
            pooled_iou=pooled_iou,
        )
    return ManifestReport(
        cells=cells,
        scene_order=tuple(succeeded),
        n_scenes=len(succeeded),
        failures=failures,
    )


# ---------------------------------------------------------------------------
# Report output
# ---------------------------------------------------------------------------


def _cell_sort_key(cell_key: CellKey) -> tuple[int, int, int]:
    strategy, aggregator, variant = cell_key
    return (
        strategy.ordinal,
        list(Aggregator).index(aggregator),
        VARIANTS.index(variant),
    )


def write_report_csv(report: ManifestReport, path: str | Path) -> None:
    """Per-scene rows: strategy, aggregator, variant, scene_id, iou."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["strategy", "aggregator", "variant", "scene_id", "iou"])
        for cell_key in sorted(report.cells, key=_cell_sort_key):
            strategy, aggregator, variant = cell_key
            per_scene = report.cells[cell_key].per_scene
            for scene_id in report.scene_order:
                writer.writerow(
                    [
                        strategy.value,
                        aggregator.value,
                        variant,
                        scene_id,
                        repr(per_scene[scene_id]),
                    ]
                )


def write_summary_csv(report: ManifestReport, path: str | Path) -> None:
    """Summary rows: strategy, aggregator, variant, mean_iou, n_scenes, n_failures."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["strategy", "aggregator", "variant", "mean_iou", "n_scenes", "n_failures"]
        pooled = any(r.pooled_iou is not None for r in report.cells.values())
        if pooled:
            header.append("pooled_iou")
        writer.writerow(header)
        for cell_key in sorted(report.cells, key=_cell_sort_key):
            strategy, aggregator, variant = cell_key
            cell = report.cells[cell_key]
            row = [
                strategy.value,
                aggregator.value,
                variant,
                repr(cell.mean_iou),
                report.n_scenes,
                report.n_failures,
            ]
            if pooled:
                row.append("" if cell.pooled_iou is None else repr(cell.pooled_iou))
            writer.writerow(row)


def format_matrix(report: ManifestReport) -> str:
    """Render mean IoU as a strategy-by-aggregator table."""
    strategies = sorted(
        {key[0] for key in report.cells}, key=lambda s: s.ordinal
    )
    aggregators = [a for a in Aggregator if any(k[1] is a for k in report.cells)]
    header = ["method"]
    for aggregator in aggregators:
        for variant in VARIANTS:
            header.append(f"{aggregator.value}/{variant}")
    rows = [header]
    for strategy in strategies:
        row = [f"Prompt {strategy.ordinal} ({strategy.value})"]
        for aggregator in aggregators:
            for variant in VARIANTS:
                cell = report.cells.get((strategy, aggregator, variant))
                row.append("-" if cell is None else f"{cell.mean_iou:.4f}")
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = [
        "  ".join(value.ljust(widths[i]) for i, value in enumerate(row)).rstrip()
        for row in rows
    ]
    return "\n".join(lines)
