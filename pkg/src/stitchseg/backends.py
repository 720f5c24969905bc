"""Promptable-segmenter backends: the abstract contract, a deterministic
mock oracle for testing, and an HTTP client for a real model service.

Wire protocol (HTTP backend), POST ``/segment`` with JSON body::

    request:  { "image": <base64 PNG>,
                "points": [ {"x": int, "y": int, "label": 1|0}, ... ],
                "mask": <optional base64 single-channel PNG, 255=foreground> }
    response: { "mask": <base64 single-channel PNG, same dims as image>,
                "score": <float in [0, 1]> }

Label semantics: 1 = positive prompt, 0 = negative prompt. Any 4xx response
carries ``{"error": string}``; any 5xx is a backend failure. Out-of-range
scores are protocol violations, not clamped, because the voting threshold
is score-scale-sensitive.
"""
from __future__ import annotations

import base64
import io
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
import requests
from PIL import Image
from scipy import ndimage

from .prompts import PointLabel, PromptBundle
from .raster import BinaryMask, RasterImage

__all__ = [
    "BackendError",
    "ProtocolError",
    "SegmentationRun",
    "BackendDescriptor",
    "SegmenterBackend",
    "MockSegmenter",
    "HttpSegmenter",
    "segment",
    "mock_segment",
    "http_segment",
]

SEGMENT_PATH = "/segment"


class BackendError(RuntimeError):
    """The backend could not produce a result (unreachable, 5xx, timeout)."""


class ProtocolError(BackendError):
    """The backend answered, but the response violates the wire contract."""


@dataclass(frozen=True)
class SegmentationRun:
    """One backend output: a stitched-frame mask and a scalar confidence."""

    mask: BinaryMask
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class BackendDescriptor:
    """How to reach a backend and how it may be driven.

    ``serial=True`` declares that the backend must not receive concurrent
    in-flight requests; callers honor the declaration.
    """

    kind: str  # "mock" | "http"
    endpoint: str | None = None
    timeout: float = 30.0
    serial: bool = False

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "http"):
            raise ValueError(f"unknown backend kind: {self.kind!r}")
        if self.kind == "http" and not self.endpoint:
            raise ValueError("http backend requires an endpoint")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


class SegmenterBackend(ABC):
    """A promptable segmenter: image + prompts in, mask + confidence out."""

    descriptor: BackendDescriptor

    @abstractmethod
    def run(self, image: RasterImage, prompts: PromptBundle) -> SegmentationRun:
        """Produce a segmentation for already-validated inputs."""


def segment(
    backend: SegmenterBackend, image: RasterImage, prompts: PromptBundle
) -> SegmentationRun:
    """Dispatch to a backend after validating prompts against the image.

    Raises ValueError before dispatch when a point lies outside the image or
    the mask prompt has the wrong dimensions; raises ProtocolError when the
    backend returns a mask of the wrong size or a confidence outside [0, 1].
    """
    for point in prompts.points:
        if not (0 <= point.location.x < image.width and 0 <= point.location.y < image.height):
            raise ValueError(
                f"prompt point {tuple(point.location)} outside image "
                f"{image.width}x{image.height}"
            )
    if prompts.mask_prompt is not None and (
        prompts.mask_prompt.width != image.width
        or prompts.mask_prompt.height != image.height
    ):
        raise ValueError(
            f"mask prompt is {prompts.mask_prompt.width}x{prompts.mask_prompt.height}, "
            f"image is {image.width}x{image.height}"
        )
    run = backend.run(image, prompts)
    if run.mask.width != image.width or run.mask.height != image.height:
        raise ProtocolError(
            f"backend returned a {run.mask.width}x{run.mask.height} mask for a "
            f"{image.width}x{image.height} image"
        )
    return run


# ---------------------------------------------------------------------------
# Mock backend: a deterministic oracle standing in for the real model
# ---------------------------------------------------------------------------


def mock_segment(
    truth: BinaryMask, image: RasterImage, prompts: PromptBundle
) -> SegmentationRun:
    """Segment against a known ground truth instead of a model.

    Output is the union of the 4-connected foreground components of ``truth``
    that contain at least one positive point; it never hallucinates pixels.
    Confidence is the fraction of point prompts consistent with the truth
    (positives on foreground, negatives on background). The mask prompt is
    ignored in both the output and the confidence.
    """
    if truth.width != image.width or truth.height != image.height:
        raise ValueError(
            f"truth is {truth.width}x{truth.height}, image is {image.width}x{image.height}"
        )
    labels, _ = ndimage.label(truth.values)  # default structure = 4-connectivity
    return _mock_run(truth, labels, prompts)


def _mock_run(
    truth: BinaryMask, labels: np.ndarray, prompts: PromptBundle
) -> SegmentationRun:
    hit_components: set[int] = set()
    consistent = 0
    for point in prompts.points:
        on_foreground = bool(truth.values[point.location.y, point.location.x])
        if point.label is PointLabel.POSITIVE:
            if on_foreground:
                consistent += 1
                hit_components.add(int(labels[point.location.y, point.location.x]))
        else:
            if not on_foreground:
                consistent += 1
    if hit_components:
        out = np.isin(labels, sorted(hit_components))
    else:
        out = np.zeros_like(truth.values)
    return SegmentationRun(
        mask=BinaryMask(out), confidence=consistent / len(prompts.points)
    )


class MockSegmenter(SegmenterBackend):
    """Mock backend bound to one ground-truth mask; pure and fully concurrent."""

    def __init__(self, truth: BinaryMask):
        self.truth = truth
        self.descriptor = BackendDescriptor(kind="mock")
        self._labels, _ = ndimage.label(truth.values)

    def run(self, image: RasterImage, prompts: PromptBundle) -> SegmentationRun:
        if self.truth.width != image.width or self.truth.height != image.height:
            raise ValueError(
                f"truth is {self.truth.width}x{self.truth.height}, "
                f"image is {image.width}x{image.height}"
            )
        return _mock_run(self.truth, self._labels, prompts)


# ---------------------------------------------------------------------------
# HTTP backend
# ---------------------------------------------------------------------------


def _png_b64(arr: np.ndarray, mode: str) -> str:
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def encode_image(image: RasterImage) -> str:
    return _png_b64(np.asarray(image.pixels), "RGB")


def encode_mask(mask: BinaryMask) -> str:
    return _png_b64(np.where(mask.values, np.uint8(255), np.uint8(0)), "L")


def decode_mask(data: str) -> BinaryMask:
    try:
        raw = base64.b64decode(data, validate=True)
        img = Image.open(io.BytesIO(raw))
        img.load()
    except Exception as exc:
        raise ProtocolError(f"response mask is not decodable PNG: {exc}") from exc
    arr = np.asarray(img.convert("L"))
    return BinaryMask(arr != 0)


def wire_request(image: RasterImage, prompts: PromptBundle) -> dict:
    """Build the JSON request body for POST /segment."""
    body: dict = {
        "image": encode_image(image),
        "points": [
            {"x": p.location.x, "y": p.location.y, "label": int(p.label)}
            for p in prompts.points
        ],
    }
    if prompts.mask_prompt is not None:
        body["mask"] = encode_mask(prompts.mask_prompt)
    return body


def http_segment(
    endpoint: str,
    image: RasterImage,
    prompts: PromptBundle,
    timeout: float = 30.0,
) -> SegmentationRun:
    """Call a remote segmenter speaking the wire protocol.

    ``endpoint`` is the service base URL; the request goes to
    ``<endpoint>/segment``.
    """
    url = endpoint.rstrip("/") + SEGMENT_PATH
    try:
        resp = requests.post(url, json=wire_request(image, prompts), timeout=timeout)
    except requests.RequestException as exc:
        raise BackendError(f"backend unreachable at {endpoint}: {exc}") from exc
    if resp.status_code >= 500:
        raise BackendError(f"backend failed at {endpoint}: HTTP {resp.status_code}")
    if resp.status_code != 200:
        detail = ""
        try:
            detail = resp.json().get("error", "")
        except Exception:
            pass
        raise BackendError(
            f"backend rejected request at {endpoint}: HTTP {resp.status_code} {detail}".rstrip()
        )
    try:
        payload = resp.json()
    except ValueError as exc:
        raise ProtocolError(f"response from {endpoint} is not JSON: {exc}") from exc
    if not isinstance(payload, dict) or "mask" not in payload or "score" not in payload:
        raise ProtocolError(f"response from {endpoint} is missing mask/score fields")
    mask = decode_mask(payload["mask"])
    score = payload["score"]
    if not isinstance(score, (int, float)) or isinstance(score, bool):
        raise ProtocolError(f"score is not a number: {score!r}")
    if not 0.0 <= float(score) <= 1.0:
        raise ProtocolError(f"score {score} outside [0, 1]")
    if mask.width != image.width or mask.height != image.height:
        raise ProtocolError(
            f"response mask is {mask.width}x{mask.height}, "
            f"image is {image.width}x{image.height}"
        )
    return SegmentationRun(mask=mask, confidence=float(score))


class HttpSegmenter(SegmenterBackend):
    """Client for a remote segmentation service."""

    def __init__(self, endpoint: str, timeout: float = 30.0, serial: bool = False):
        self.descriptor = BackendDescriptor(
            kind="http", endpoint=endpoint, timeout=timeout, serial=serial
        )

    def run(self, image: RasterImage, prompts: PromptBundle) -> SegmentationRun:
        assert self.descriptor.endpoint is not None
        return http_segment(
            self.descriptor.endpoint, image, prompts, timeout=self.descriptor.timeout
        )
