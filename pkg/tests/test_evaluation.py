from __future__ import annotations

import csv
import hashlib
import inspect

import numpy as np
import pytest

from conftest import random_mask
from oracles import close_shift, iou_count, mock_reference, vote_mask_fsum
from stitchseg.evaluation import (
    IoUReport,
    SceneRecord,
    evaluate_manifest,
    evaluate_scene,
    format_matrix,
    iou,
    mock_backend_factory,
    read_manifest,
    write_report_csv,
    write_summary_csv,
)
from stitchseg.pipeline import Aggregator, PredictionConfig, predict_scene
from stitchseg.prompts import PromptConfig, PromptStrategy, build_prompts
from stitchseg.raster import BinaryMask, load_mask
from stitchseg.seeding import rng_for_run
from stitchseg.stitching import StitchLayout
from synth import (
    SceneArrays,
    make_manifest_fixture,
    rect_mask,
    render,
    scene_to_files,
    write_manifest,
)


# ---------------------------------------------------------------------------
# IoU
# ---------------------------------------------------------------------------


def test_iou_identity(rng):
    mask = random_mask(rng, 9, 7, p=0.5)
    if mask.foreground_count == 0:
        mask = BinaryMask.filled(9, 7, True)
    assert iou(mask, mask) == 1.0


def test_iou_disjoint():
    a = BinaryMask(np.array([[True, False]]))
    b = BinaryMask(np.array([[False, True]]))
    assert iou(a, b) == 0.0


def test_iou_half_overlap():
    truth = BinaryMask(np.array([[True, True, False, False]]))
    predicted = BinaryMask(np.array([[True, True, True, True]]))
    assert iou(truth, predicted) == 0.5


def test_iou_both_empty_is_one():
    empty = BinaryMask.filled(4, 4, False)
    assert iou(empty, empty) == 1.0


def test_iou_symmetric_bounded_matches_oracle(rng):
    for _ in range(50):
        a = random_mask(rng, 8, 6, p=float(rng.random()))
        b = random_mask(rng, 8, 6, p=float(rng.random()))
        v = iou(a, b)
        assert v == iou(b, a)
        assert 0.0 <= v <= 1.0
        assert v == pytest.approx(iou_count(a.values, b.values))


def test_iou_dimension_mismatch():
    with pytest.raises(ValueError):
        iou(BinaryMask.filled(3, 3), BinaryMask.filled(4, 3))


# ---------------------------------------------------------------------------
# Manifest parsing
# ---------------------------------------------------------------------------


def test_read_manifest_resolves_relative_paths(tmp_path, rng):
    manifest = make_manifest_fixture(tmp_path, n_scenes=2, seed=3)
    records = read_manifest(manifest)
    assert [r.scene_id for r in records] == ["scene000", "scene001"]
    assert records[0].key_image.exists()


def test_read_manifest_duplicate_scene_id(tmp_path):
    manifest = tmp_path / "manifest.csv"
    manifest.write_text(
        "scene_id,key_image,key_mask,query_image,query_truth\n"
        "a,k.png,m.png,q.png,t.png\n"
        "a,k2.png,m2.png,q2.png,t2.png\n"
    )
    with pytest.raises(ValueError, match="duplicate scene_id"):
        read_manifest(manifest)


def test_read_manifest_requires_header(tmp_path):
    manifest = tmp_path / "manifest.csv"
    manifest.write_text("id,key\na,b\n")
    with pytest.raises(ValueError, match="header"):
        read_manifest(manifest)


def test_read_manifest_empty(tmp_path):
    manifest = tmp_path / "manifest.csv"
    manifest.write_text("scene_id,key_image,key_mask,query_image,query_truth\n")
    with pytest.raises(ValueError, match="no scenes"):
        read_manifest(manifest)


def test_scene_record_requires_distinct_paths(tmp_path):
    with pytest.raises(ValueError, match="distinct"):
        SceneRecord(
            scene_id="s",
            key_image=tmp_path / "a.png",
            key_mask=tmp_path / "a.png",
            query_image=tmp_path / "q.png",
            query_truth=tmp_path / "t.png",
        )


# ---------------------------------------------------------------------------
# Scene evaluation against the mock oracle
# ---------------------------------------------------------------------------


def hit_fixture(tmp_path):
    """16x16 scene whose single query component is large enough that the
    blind positives reliably hit it."""
    rng = np.random.default_rng(5)
    key_mask = rect_mask(16, 16, [(3, 4, 8, 8)])
    query_truth = rect_mask(16, 16, [(2, 2, 12, 10)])
    scene = SceneArrays(
        key_image=render(key_mask, rng),
        key_mask=key_mask,
        query_image=render(query_truth, rng),
        query_truth=query_truth,
        query_areas=[120],
    )
    return scene_to_files(scene, tmp_path, "hit")


def small_config(**overrides) -> PredictionConfig:
    defaults = dict(
        strategies=(PromptStrategy.KEY_ONLY, PromptStrategy.KEY_AND_QUERY),
        aggregators=(Aggregator.BEST, Aggregator.CWMV),
        runs=16,
        master_seed=0,
        prompts=PromptConfig(3, 3, 1),
        cwmv_m=4.0,
        close_side=5,
    )
    defaults.update(overrides)
    return PredictionConfig(**defaults)


def derive_seed_reference(master_seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{master_seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def brute_force_query_iou(
    record, strategy, aggregator, variant, config
) -> float:
    """Recompute one cell end to end using only oracle primitives."""
    key_mask = load_mask(record.key_mask)
    query_truth = load_mask(record.query_truth)
    stitched_truth = np.concatenate([key_mask.values, query_truth.values], axis=1)
    layout = StitchLayout(
        key_width=key_mask.width,
        total_width=key_mask.width + query_truth.width,
        height=key_mask.height,
    )
    seed = derive_seed_reference(config.master_seed, record.scene_id)
    masks, confs = [], []
    for i in range(config.runs):
        bundle = build_prompts(
            strategy, key_mask, layout, config.prompts, rng_for_run(seed, i)
        )
        mask, conf = mock_reference(
            stitched_truth,
            [(p.location.x, p.location.y, int(p.label)) for p in bundle.points],
        )
        masks.append(mask)
        confs.append(conf)
    masks_arr = np.stack(masks)
    confs_arr = np.array(confs)
    if aggregator is Aggregator.BEST:
        stitched_pred = masks_arr[int(np.argmax(confs_arr))]
    else:
        stitched_pred = vote_mask_fsum(masks_arr, confs_arr, config.cwmv_m)
    if variant == "processed":
        stitched_pred = close_shift(stitched_pred, config.close_side)
    query_pred = stitched_pred[:, layout.key_width :]
    return iou_count(query_truth.values, query_pred)


def test_cwmv_recovers_hit_component_exactly(tmp_path):
    record = hit_fixture(tmp_path)
    config = small_config()
    scores = evaluate_scene(mock_backend_factory, record, config)
    cell = scores[(PromptStrategy.KEY_AND_QUERY, Aggregator.CWMV, "raw")]
    expected = brute_force_query_iou(
        record, PromptStrategy.KEY_AND_QUERY, Aggregator.CWMV, "raw", config
    )
    assert expected == 1.0  # blind positives hit the only component often enough
    assert cell.iou == 1.0
    processed = scores[(PromptStrategy.KEY_AND_QUERY, Aggregator.CWMV, "processed")]
    assert processed.iou == 1.0


def test_key_only_collapses_to_zero_on_query_half(tmp_path):
    record = hit_fixture(tmp_path)
    scores = evaluate_scene(mock_backend_factory, record, small_config())
    for variant in ("raw", "processed"):
        for aggregator in Aggregator:
            assert scores[(PromptStrategy.KEY_ONLY, aggregator, variant)].iou == 0.0


def test_empty_truth_and_empty_prediction_scores_one(tmp_path):
    rng = np.random.default_rng(9)
    key_mask = rect_mask(16, 16, [(3, 4, 8, 8)])
    query_truth = np.zeros((16, 16), dtype=bool)
    scene = SceneArrays(
        key_image=render(key_mask, rng),
        key_mask=key_mask,
        query_image=render(query_truth, rng),
        query_truth=query_truth,
        query_areas=[],
    )
    record = scene_to_files(scene, tmp_path, "empty")
    config = small_config(strategies=(PromptStrategy.KEY_ONLY,))
    scores = evaluate_scene(mock_backend_factory, record, config)
    assert scores[(PromptStrategy.KEY_ONLY, Aggregator.CWMV, "raw")].iou == 1.0


def test_no_leakage_pipeline_signature():
    params = set(inspect.signature(predict_scene).parameters)
    assert params == {"backend", "key_image", "key_mask", "query_image", "config"}
    assert not any("truth" in name for name in params)


# ---------------------------------------------------------------------------
# Manifest evaluation
# ---------------------------------------------------------------------------


def test_single_scene_mean_equals_scene_iou(tmp_path):
    manifest = make_manifest_fixture(tmp_path, n_scenes=1, seed=2)
    records = read_manifest(manifest)
    config = small_config()
    report = evaluate_manifest(mock_backend_factory, records, config)
    scores = evaluate_scene(mock_backend_factory, records[0], config)
    for cell_key, cell_report in report.cells.items():
        assert cell_report.mean_iou == scores[cell_key].iou
        assert list(cell_report.per_scene) == ["scene000"]


def test_matrix_matches_per_cell_recomputation(tmp_path):
    manifest = make_manifest_fixture(tmp_path, n_scenes=3, seed=11, size=32)
    records = read_manifest(manifest)
    config = small_config(runs=8)
    report = evaluate_manifest(mock_backend_factory, records, config)
    for strategy in config.strategies:
        for aggregator in config.aggregators:
            for variant in ("raw", "processed"):
                cell = report.cells[(strategy, aggregator, variant)]
                for record in records:
                    expected = brute_force_query_iou(
                        record, strategy, aggregator, variant, config
                    )
                    assert cell.per_scene[record.scene_id] == pytest.approx(
                        expected, abs=0
                    )


def test_report_mean_matches_per_scene_rows(tmp_path):
    manifest = make_manifest_fixture(tmp_path, n_scenes=3, seed=4)
    records = read_manifest(manifest)
    report = evaluate_manifest(mock_backend_factory, records, small_config(runs=6))
    for cell in report.cells.values():
        values = list(cell.per_scene.values())
        assert cell.mean_iou == sum(values) / len(values)


def test_failed_scene_excluded_and_counted(tmp_path):
    manifest = make_manifest_fixture(tmp_path, n_scenes=2, seed=6)
    records = read_manifest(manifest)
    broken = SceneRecord(
        scene_id="broken",
        key_image=tmp_path / "missing_k.png",
        key_mask=tmp_path / "missing_m.png",
        query_image=tmp_path / "missing_q.png",
        query_truth=tmp_path / "missing_t.png",
    )
    report = evaluate_manifest(
        mock_backend_factory, records + [broken], small_config(runs=4)
    )
    assert report.n_failures == 1
    assert "broken" in report.failures
    assert report.n_scenes == 2
    for cell in report.cells.values():
        assert set(cell.per_scene) == {"scene000", "scene001"}


def test_all_scenes_failed_raises(tmp_path):
    broken = SceneRecord(
        scene_id="broken",
        key_image=tmp_path / "a.png",
        key_mask=tmp_path / "b.png",
        query_image=tmp_path / "c.png",
        query_truth=tmp_path / "d.png",
    )
    with pytest.raises(RuntimeError, match="all 1 scenes failed"):
        evaluate_manifest(mock_backend_factory, [broken], small_config())


def test_pooled_iou_is_pixel_pooled(tmp_path):
    manifest = make_manifest_fixture(tmp_path, n_scenes=2, seed=8)
    records = read_manifest(manifest)
    config = small_config(runs=6)
    report = evaluate_manifest(mock_backend_factory, records, config, pooled=True)
    for cell_key, cell in report.cells.items():
        inter = union = 0
        for record in records:
            score = evaluate_scene(mock_backend_factory, record, config)[cell_key]
            inter += score.intersection
            union += score.union
        expected = 1.0 if union == 0 else inter / union
        assert cell.pooled_iou == pytest.approx(expected, abs=0)


def test_shared_key_overrides_per_scene_keys(tmp_path):
    rng = np.random.default_rng(12)
    good = scene_to_files(
        SceneArrays(
            key_image=render(rect_mask(32, 32, [(4, 4, 10, 10)]), rng),
            key_mask=rect_mask(32, 32, [(4, 4, 10, 10)]),
            query_image=render(rect_mask(32, 32, [(6, 6, 18, 18)]), rng),
            query_truth=rect_mask(32, 32, [(6, 6, 18, 18)]),
            query_areas=[324],
        ),
        tmp_path,
        "good",
    )
    # this scene's own key mask is empty: unusable without a shared key
    bad_key = scene_to_files(
        SceneArrays(
            key_image=render(np.zeros((32, 32), dtype=bool), rng),
            key_mask=np.zeros((32, 32), dtype=bool),
            query_image=render(rect_mask(32, 32, [(8, 8, 16, 14)]), rng),
            query_truth=rect_mask(32, 32, [(8, 8, 16, 14)]),
            query_areas=[224],
        ),
        tmp_path,
        "badkey",
    )
    config = small_config(runs=4, strategies=(PromptStrategy.KEY_AND_QUERY,))
    without = evaluate_manifest(mock_backend_factory, [good, bad_key], config)
    assert "badkey" in without.failures
    with_shared = evaluate_manifest(
        mock_backend_factory,
        [good, bad_key],
        config,
        shared_key=(good.key_image, good.key_mask),
    )
    assert with_shared.n_failures == 0
    assert with_shared.n_scenes == 2


def test_report_csvs_roundtrip(tmp_path):
    manifest = make_manifest_fixture(tmp_path, n_scenes=2, seed=13)
    records = read_manifest(manifest)
    report = evaluate_manifest(mock_backend_factory, records, small_config(runs=4))
    report_path = tmp_path / "report.csv"
    summary_path = tmp_path / "summary.csv"
    write_report_csv(report, report_path)
    write_summary_csv(report, summary_path)

    with open(report_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(report.cells) * 2
    by_cell: dict[tuple[str, str, str], list[float]] = {}
    for row in rows:
        key = (row["strategy"], row["aggregator"], row["variant"])
        by_cell.setdefault(key, []).append(float(row["iou"]))
    with open(summary_path, newline="") as fh:
        summary_rows = list(csv.DictReader(fh))
    assert len(summary_rows) == len(report.cells)
    for row in summary_rows:
        key = (row["strategy"], row["aggregator"], row["variant"])
        values = by_cell[key]
        assert float(row["mean_iou"]) == sum(values) / len(values)
        assert int(row["n_scenes"]) == 2
        assert int(row["n_failures"]) == 0


def test_format_matrix_layout(tmp_path):
    manifest = make_manifest_fixture(tmp_path, n_scenes=1, seed=14)
    records = read_manifest(manifest)
    report = evaluate_manifest(mock_backend_factory, records, small_config(runs=4))
    table = format_matrix(report)
    lines = table.splitlines()
    assert lines[0].split()[0] == "method"
    assert "best/raw" in lines[0] and "cwmv/processed" in lines[0]
    assert lines[1].startswith("Prompt 1 (key-only)")
    assert lines[2].startswith("Prompt 2 (key-and-query)")


def test_iou_report_mean_validation():
    with pytest.raises(ValueError, match="mean"):
        IoUReport(per_scene={"a": 0.5, "b": 1.0}, mean_iou=0.9, config_echo={})
    with pytest.raises(ValueError, match="outside"):
        IoUReport(per_scene={"a": 1.5}, mean_iou=1.5, config_echo={})


def test_evaluate_manifest_requires_scenes():
    with pytest.raises(ValueError, match="no scenes"):
        evaluate_manifest(mock_backend_factory, [], small_config())
