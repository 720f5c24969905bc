"""Synthetic rectangle scenes for harness and end-to-end tests.

Scenes are built so no foreground touches the stitch seam (2-pixel margin
on the seam-facing edges), which keeps key and query components disjoint
in the stitched frame. Query halves carry two large rectangles sized so
blind positives hit them often enough for voting to keep them, plus an
optional small "shed" that is allowed to be lost.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from stitchseg.evaluation import SceneRecord

BACKGROUND = (52, 110, 60)
BUILDING = (150, 148, 140)


def rect_mask(width: int, height: int, rects: list[tuple[int, int, int, int]]) -> np.ndarray:
    """rects are (x0, y0, rect_width, rect_height)."""
    mask = np.zeros((height, width), dtype=bool)
    for x0, y0, rw, rh in rects:
        mask[y0 : y0 + rh, x0 : x0 + rw] = True
    return mask


def render(mask: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Paint buildings over textured ground so images are not constant."""
    h, w = mask.shape
    img = np.empty((h, w, 3), dtype=np.uint8)
    noise = rng.integers(-12, 13, size=(h, w, 1))
    img[:] = np.clip(np.array(BACKGROUND) + noise, 0, 255)
    img[mask] = BUILDING
    return img


@dataclass(frozen=True)
class SceneArrays:
    key_image: np.ndarray
    key_mask: np.ndarray
    query_image: np.ndarray
    query_truth: np.ndarray
    query_areas: list[int]  # rectangle areas, for expectation oracles


def build_scene(rng: np.random.Generator, size: int = 64) -> SceneArrays:
    """One key/query pair with 2-3 query rectangles (two large, maybe a shed)."""
    scale = size / 64.0

    def s(v: int) -> int:
        return max(1, round(v * scale))

    # key half: two solid rectangles away from the seam (right edge of the key)
    key_rects = [
        (s(6) + int(rng.integers(0, 3)), s(6) + int(rng.integers(0, 3)), s(22), s(20)),
        (s(34), s(38), s(18), s(16)),
    ]
    key_mask = rect_mask(size, size, key_rects)
    key_mask[:, size - 2 :] = False  # seam margin

    # query half: two large stacked rectangles with a 2px seam margin (left edge)
    top_h = int(rng.integers(s(26), s(28) + 1))
    bot_h = int(rng.integers(s(26), s(28) + 1))
    width = int(rng.integers(s(57), s(60) + 1))
    x0 = 2
    top = (x0, 2, width, top_h)
    bottom = (x0, 2 + top_h + 2, width, bot_h)
    query_rects = [top, bottom]
    if rng.random() < 0.5:
        shed_side = int(rng.integers(4, 6))
        shed_y = 2 + top_h + 2 + bot_h + 2
        if shed_y + shed_side <= size - 1:
            query_rects.append((x0 + 1, shed_y, shed_side, shed_side))
    query_truth = rect_mask(size, size, query_rects)
    query_truth[:, :2] = False

    return SceneArrays(
        key_image=render(key_mask, rng),
        key_mask=key_mask,
        query_image=render(query_truth, rng),
        query_truth=query_truth,
        query_areas=[rw * rh for _, _, rw, rh in query_rects],
    )


def save_png(arr: np.ndarray, path: Path) -> None:
    if arr.dtype == np.bool_:
        Image.fromarray(np.where(arr, np.uint8(255), np.uint8(0)), mode="L").save(path)
    else:
        Image.fromarray(arr).save(path)


def scene_to_files(scene: SceneArrays, directory: Path, scene_id: str) -> SceneRecord:
    directory.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, arr in (
        ("key_image", scene.key_image),
        ("key_mask", scene.key_mask),
        ("query_image", scene.query_image),
        ("query_truth", scene.query_truth),
    ):
        path = directory / f"{scene_id}_{name}.png"
        save_png(arr, path)
        paths[name] = path
    return SceneRecord(scene_id=scene_id, **paths)


def write_manifest(records: list[SceneRecord], path: Path) -> Path:
    lines = ["scene_id,key_image,key_mask,query_image,query_truth"]
    for record in records:
        lines.append(
            ",".join(
                [
                    record.scene_id,
                    record.key_image.name,
                    record.key_mask.name,
                    record.query_image.name,
                    record.query_truth.name,
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n")
    return path


def make_manifest_fixture(
    directory: Path, n_scenes: int, seed: int = 7, size: int = 64
) -> Path:
    rng = np.random.default_rng(seed)
    records = [
        scene_to_files(build_scene(rng, size=size), directory, f"scene{i:03d}")
        for i in range(n_scenes)
    ]
    return write_manifest(records, directory / "manifest.csv")
