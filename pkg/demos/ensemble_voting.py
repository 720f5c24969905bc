"""Confidence-weighted majority voting over an ensemble of randomized runs.

Runs K prompt-sample/segment rounds against the mock backend, then shows
the accumulated score map and how the threshold divisor m trades precision
for recall: tau = (sum of confidences) / m, so smaller m removes more
low-consensus pixels.
"""
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from stitchseg import (
    BinaryMask,
    CwmvParams,
    EnsembleConfig,
    MockSegmenter,
    PromptConfig,
    PromptStrategy,
    RasterImage,
    accumulate_cwmv,
    aggregate_best,
    aggregate_cwmv,
    cwmv_threshold,
    run_ensemble,
    stitch,
    stitch_masks,
)

out_dir = pathlib.Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

size = 64
key_mask = np.zeros((size, size), dtype=bool)
key_mask[10:40, 8:40] = True
query_truth = np.zeros((size, size), dtype=bool)
query_truth[4:30, 6:60] = True   # large building: blind positives hit it often
query_truth[36:60, 6:60] = True  # second large building
query_truth[32:34, 30:33] = True # tiny shed: rarely hit, voted away


def paint(mask):
    img = np.full((size, size, 3), (58, 112, 66), dtype=np.uint8)
    img[mask] = (150, 148, 140)
    return img


key_image = RasterImage(paint(key_mask))
query_image = RasterImage(paint(query_truth))
stitched, layout = stitch(key_image, query_image)

# the mock backend knows the stitched truth and returns any component a
# positive point lands in; confidence = fraction of consistent points
backend = MockSegmenter(stitch_masks(BinaryMask(key_mask), BinaryMask(query_truth)))

config = EnsembleConfig(
    runs=32,
    master_seed=5,
    strategy=PromptStrategy.KEY_AND_QUERY,
    prompt_config=PromptConfig(n_pos_key=3, n_neg_key=3, n_pos_query=1),
)
result = run_ensemble(backend, stitched, BinaryMask(key_mask), layout, config)
confidences = result.confidences
print(f"K={len(result.runs)} runs, confidences min/max: "
      f"{confidences.min():.3f}/{confidences.max():.3f}")

best = aggregate_best(result)
print(f"best selection keeps one run at confidence {best.confidence:.3f}")

scores = accumulate_cwmv(result)
fig, axes = plt.subplots(1, 5, figsize=(16, 3.2))
axes[0].imshow(scores.scores, cmap="viridis")
axes[0].set_title("accumulated votes")
for ax, m in zip(axes[1:], (1.0, 2.0, 4.0, 8.0)):
    params = CwmvParams(m=m)
    voted = aggregate_cwmv(result, params)
    tau = cwmv_threshold(result, params)
    ax.imshow(voted.values, cmap="gray")
    ax.set_title(f"m={m:g} (tau={tau:.1f})")
for ax in axes:
    ax.set_axis_off()
fig.tight_layout()
fig.savefig(out_dir / "voting_threshold_sweep.png", dpi=120)
print(f"wrote {out_dir / 'voting_threshold_sweep.png'}")
