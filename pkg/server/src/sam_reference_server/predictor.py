"""Predictor backends for the reference server.

A predictor receives a decoded RGB image, point prompts, and an optional
binary mask prompt, and returns a boolean mask plus a raw score. The HTTP
layer owns clamping and encoding, so predictors stay trivially swappable:
tests inject a stub, production wraps a real checkpoint.
"""
from __future__ import annotations

import threading
from typing import Protocol

import numpy as np
from PIL import Image

LOW_RES_SIDE = 256
MASK_LOGIT = 4.0


class Predictor(Protocol):
    def predict(
        self,
        image_rgb: np.ndarray,
        point_coords: np.ndarray,
        point_labels: np.ndarray,
        mask_prompt: np.ndarray | None,
    ) -> tuple[np.ndarray, float]:
        """Return (boolean mask with the image's shape, raw score)."""
        ...


def mask_to_low_res_logits(mask: np.ndarray, side: int = LOW_RES_SIDE) -> np.ndarray:
    """Convert a binary mask prompt to the model's low-resolution input.

    Rule: nearest-neighbor downsample to ``side`` x ``side``, then map
    background to -MASK_LOGIT and foreground to +MASK_LOGIT.
    """
    img = Image.fromarray(np.where(mask, np.uint8(255), np.uint8(0)), mode="L")
    small = np.asarray(img.resize((side, side), Image.NEAREST)) != 0
    return np.where(small, np.float32(MASK_LOGIT), np.float32(-MASK_LOGIT))


class SamCheckpointPredictor:
    """Wraps a segment-anything checkpoint.

    Of the model's candidate masks, the one with the maximal predicted score
    is returned. Inference is serialized with a lock: one request at a time
    per model instance.
    """

    def __init__(self, checkpoint: str, model_type: str = "vit_h", device: str = "cpu"):
        try:
            from segment_anything import SamPredictor, sam_model_registry
        except ImportError as exc:  # pragma: no cover - needs the sam extra
            raise RuntimeError(
                "segment-anything is not installed; install the [sam] extra"
            ) from exc
        sam = sam_model_registry[model_type](checkpoint=checkpoint)
        sam.to(device)
        sam.eval()
        self._predictor = SamPredictor(sam)
        self._lock = threading.Lock()

    def predict(
        self,
        image_rgb: np.ndarray,
        point_coords: np.ndarray,
        point_labels: np.ndarray,
        mask_prompt: np.ndarray | None,
    ) -> tuple[np.ndarray, float]:  # pragma: no cover - needs the sam extra
        with self._lock:
            self._predictor.set_image(image_rgb)
            mask_input = None
            if mask_prompt is not None:
                mask_input = mask_to_low_res_logits(mask_prompt)[None]
            masks, scores, _ = self._predictor.predict(
                point_coords=point_coords.astype(np.float32),
                point_labels=point_labels.astype(np.int64),
                mask_input=mask_input,
                multimask_output=True,
            )
            best = int(np.argmax(scores))
            return masks[best].astype(bool), float(scores[best])
