"""HTTP surface of the reference server.

Wire protocol::

    GET  /health   -> 200 {"status": "ok", "variant": <model tag>}
    POST /segment  -> request  { "image": <base64 PNG>,
                                 "points": [ {"x", "y", "label": 1|0}, ... ],
                                 "mask": <optional base64 single-channel PNG> }
                      response { "mask": <base64 single-channel PNG>,
                                 "score": <float in [0, 1]> }

Status codes: 400 for malformed JSON/base64/fields, 422 for out-of-bounds
points, 500 for inference failures. Scores are clamped into [0, 1] before
responding; response masks always match the request image's dimensions.
"""
from __future__ import annotations

import base64
import io
import json

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from PIL import Image, UnidentifiedImageError

from .predictor import Predictor

__all__ = ["create_app"]


class _BadRequest(Exception):
    pass


def _decode_png(data: object, field: str) -> np.ndarray:
    if not isinstance(data, str):
        raise _BadRequest(f"{field} must be a base64 string")
    try:
        raw = base64.b64decode(data, validate=True)
    except Exception as exc:
        raise _BadRequest(f"{field} is not valid base64: {exc}") from exc
    try:
        img = Image.open(io.BytesIO(raw))
        img.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise _BadRequest(f"{field} is not a decodable PNG: {exc}") from exc
    return np.asarray(img)


def _parse_points(data: object) -> list[tuple[int, int, int]]:
    if not isinstance(data, list) or not data:
        raise _BadRequest("points must be a nonempty list")
    points = []
    for i, entry in enumerate(data):
        if not isinstance(entry, dict):
            raise _BadRequest(f"points[{i}] must be an object")
        try:
            x, y, label = entry["x"], entry["y"], entry["label"]
        except KeyError as exc:
            raise _BadRequest(f"points[{i}] is missing {exc.args[0]!r}") from exc
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in (x, y, label)):
            raise _BadRequest(f"points[{i}] fields must be integers")
        if label not in (0, 1):
            raise _BadRequest(f"points[{i}].label must be 1 (positive) or 0 (negative)")
        points.append((x, y, label))
    return points


def _encode_mask(mask: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(np.where(mask, np.uint8(255), np.uint8(0)), mode="L").save(
        buf, format="PNG"
    )
    return base64.b64encode(buf.getvalue()).decode("ascii")


def create_app(predictor: Predictor, variant: str = "unknown") -> FastAPI:
    app = FastAPI(title="sam-reference-server")

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "variant": variant}

    @app.post("/segment")
    async def segment(request: Request) -> JSONResponse:
        raw = await request.body()
        try:
            payload = json.loads(raw)
        except json.JSONDecodeError as exc:
            return JSONResponse(status_code=400, content={"error": f"body is not JSON: {exc}"})
        if not isinstance(payload, dict):
            return JSONResponse(status_code=400, content={"error": "body must be a JSON object"})

        try:
            if "image" not in payload:
                raise _BadRequest("image field is required")
            image = _decode_png(payload["image"], "image")
            if image.ndim == 2:
                image = np.stack([image] * 3, axis=2)
            if image.ndim != 3 or image.shape[2] < 3:
                raise _BadRequest("image must decode to an RGB raster")
            image = image[:, :, :3].astype(np.uint8)
            points = _parse_points(payload.get("points"))
            mask_prompt = None
            if payload.get("mask") is not None:
                decoded = _decode_png(payload["mask"], "mask")
                if decoded.ndim == 3:
                    decoded = decoded[:, :, 0]
                if decoded.shape != image.shape[:2]:
                    raise _BadRequest(
                        f"mask is {decoded.shape[1]}x{decoded.shape[0]}, image is "
                        f"{image.shape[1]}x{image.shape[0]}"
                    )
                mask_prompt = decoded != 0
        except _BadRequest as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})

        height, width = image.shape[:2]
        for x, y, _ in points:
            if not (0 <= x < width and 0 <= y < height):
                return JSONResponse(
                    status_code=422,
                    content={"error": f"point ({x}, {y}) outside image {width}x{height}"},
                )

        coords = np.array([(x, y) for x, y, _ in points], dtype=np.int64)
        labels = np.array([label for _, _, label in points], dtype=np.int64)
        try:
            mask, score = predictor.predict(image, coords, labels, mask_prompt)
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != (height, width):
                raise RuntimeError(
                    f"predictor returned {mask.shape}, expected {(height, width)}"
                )
        except Exception as exc:
            return JSONResponse(status_code=500, content={"error": f"inference failed: {exc}"})

        return JSONResponse(
            status_code=200,
            content={
                "mask": _encode_mask(mask),
                "score": float(min(1.0, max(0.0, float(score)))),
            },
        )

    return app
