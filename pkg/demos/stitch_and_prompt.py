"""Stitching a labeled key image to a query image and sampling prompts.

Builds a toy scene, concatenates the two halves, and draws the point
prompts each of the four strategies produces. Writes figures into
demos/output/.
"""
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from stitchseg import (
    BinaryMask,
    PromptConfig,
    PromptStrategy,
    RasterImage,
    build_prompts,
    stitch,
)
from stitchseg.prompts import PointLabel

out_dir = pathlib.Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

rng = np.random.default_rng(7)

# a key image whose mask we know, and a query image we want segmented
size = 64
key_mask = np.zeros((size, size), dtype=bool)
key_mask[8:30, 6:34] = True
key_mask[40:56, 36:58] = True
query_truth = np.zeros((size, size), dtype=bool)
query_truth[6:34, 10:50] = True


def paint(mask):
    img = np.full((size, size, 3), (60, 115, 70), dtype=np.uint8)
    img[mask] = (155, 150, 140)
    return img


key_image = RasterImage(paint(key_mask))
query_image = RasterImage(paint(query_truth))

stitched, layout = stitch(key_image, query_image)
print(f"stitched frame: {layout.total_width}x{layout.height}, key half ends at x={layout.key_width}")

# the same seed gives every strategy the same key draws, so the figures are comparable
fig, axes = plt.subplots(4, 1, figsize=(7, 10))
for ax, strategy in zip(axes, PromptStrategy):
    bundle = build_prompts(
        strategy,
        BinaryMask(key_mask),
        layout,
        PromptConfig(n_pos_key=3, n_neg_key=3, n_pos_query=1),
        np.random.default_rng(123),
    )
    ax.imshow(stitched.pixels)
    ax.axvline(layout.key_width - 0.5, color="white", linestyle="--", linewidth=1)
    for point in bundle.points:
        color = "lime" if point.label is PointLabel.POSITIVE else "red"
        ax.plot(point.location.x, point.location.y, "o", color=color, markersize=6)
    extra = " + mask prompt" if bundle.mask_prompt is not None else ""
    ax.set_title(f"Prompt {strategy.ordinal}: {strategy.value}{extra}", fontsize=10)
    ax.set_axis_off()
fig.tight_layout()
fig.savefig(out_dir / "prompt_strategies.png", dpi=120)
print(f"wrote {out_dir / 'prompt_strategies.png'}")
