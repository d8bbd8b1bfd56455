"""The HTTP service: three endpoints, strict error shapes.

Request bodies are parsed by hand instead of through response-model
validation so malformed input is always a 400 with {"error": string},
never a framework-shaped 422. Inference runs under a lock: one request
in flight, the rest queue, and the protocol behavior is identical
either way.
"""

from __future__ import annotations

import base64
import binascii
import io
import threading
from typing import Callable, Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from PIL import Image as PILImage

from .config import ServerConfig
from .models import (
    ENCODER_SIDE,
    SEGMENTER_DEFAULTS,
    SEGMENTER_SIDE,
    Encoder,
    Segmenter,
    resolve_encoder,
    resolve_segmenter,
)

MAX_IN_FLIGHT = 1


class BadRequest(ValueError):
    pass


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def _loading() -> JSONResponse:
    return JSONResponse({"status": "loading"}, status_code=503)


async def _json_object(request: Request) -> dict:
    try:
        body = await request.json()
    except Exception as e:
        raise BadRequest(f"body is not valid JSON: {e}") from None
    if not isinstance(body, dict):
        raise BadRequest("body must be a JSON object")
    return body


def _decode_image(body: dict) -> np.ndarray:
    raw = body.get("image")
    if not isinstance(raw, str):
        raise BadRequest("missing or non-string key 'image'")
    try:
        png = base64.b64decode(raw, validate=True)
    except (binascii.Error, ValueError):
        raise BadRequest("key 'image' is not valid base64") from None
    try:
        img = PILImage.open(io.BytesIO(png))
        img.load()
    except Exception:
        raise BadRequest("key 'image' does not decode as an image") from None
    if img.mode not in ("L", "RGB"):
        img = img.convert("RGB")
    return np.asarray(img)


def _decode_prompts(body: dict) -> list[tuple[float, float]]:
    points = body.get("points")
    labels = body.get("labels")
    if not isinstance(points, list):
        raise BadRequest("missing or non-list key 'points'")
    if not isinstance(labels, list):
        raise BadRequest("missing or non-list key 'labels'")
    if len(points) == 0:
        raise BadRequest("at least one point prompt is required")
    if len(labels) != len(points):
        raise BadRequest("'labels' length must match 'points'")
    if any(lab != 1 for lab in labels):
        raise BadRequest("only positive point labels (1) are supported")
    out = []
    for i, p in enumerate(points):
        if (
            not isinstance(p, (list, tuple))
            or len(p) != 2
            or not all(isinstance(v, (int, float)) for v in p)
        ):
            raise BadRequest(f"points[{i}] must be [x, y]")
        x, y = float(p[0]), float(p[1])
        if not (np.isfinite(x) and np.isfinite(y)):
            raise BadRequest(f"points[{i}] must be finite")
        out.append((x, y))
    return out


def _mask_png_b64(mask: np.ndarray) -> str:
    img = PILImage.fromarray(mask.astype(np.uint8) * 255, mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


class _ModelState:
    """Holds the loaded pair; swaps in atomically when the loader finishes."""

    def __init__(self) -> None:
        self.encoder: Optional[Encoder] = None
        self.segmenter: Optional[Segmenter] = None
        self.load_error: Optional[str] = None
        self.infer_lock = threading.Lock()

    @property
    def ready(self) -> bool:
        return self.encoder is not None and self.segmenter is not None


def create_app(
    config: ServerConfig,
    *,
    encoder_loader: Callable[[str, str], Encoder] = resolve_encoder,
    segmenter_loader: Callable[[str, str], Segmenter] = resolve_segmenter,
    load_in_background: bool = False,
) -> FastAPI:
    app = FastAPI(openapi_url=None, docs_url=None, redoc_url=None)
    state = _ModelState()
    app.state.models = state
    app.state.config = config

    def load() -> None:
        try:
            encoder = encoder_loader(config.encoder, config.device)
            segmenter = segmenter_loader(config.segmenter, config.device)
        except Exception as e:
            state.load_error = str(e)
            return
        state.encoder = encoder
        state.segmenter = segmenter

    if load_in_background:
        threading.Thread(target=load, daemon=True).start()
    else:
        load()

    def gate() -> Optional[JSONResponse]:
        if state.load_error is not None:
            return _error(500, f"models failed to load: {state.load_error}")
        if not state.ready:
            return _loading()
        return None

    @app.get("/v1/health")
    def health():
        if state.load_error is not None:
            return JSONResponse(
                {"status": "error", "error": state.load_error}, status_code=500
            )
        if not state.ready:
            return _loading()
        return {
            "status": "ok",
            "encoder": config.encoder,
            "segmenter": config.segmenter,
            "device": config.device,
            "max_in_flight": MAX_IN_FLIGHT,
            "encoder_input": ENCODER_SIDE,
            "segmenter_input": SEGMENTER_SIDE,
            "segmenter_defaults": SEGMENTER_DEFAULTS,
        }

    @app.post("/v1/encode")
    async def encode(request: Request):
        if (resp := gate()) is not None:
            return resp
        try:
            body = await _json_object(request)
            image = _decode_image(body)
        except BadRequest as e:
            return _error(400, str(e))
        try:
            with state.infer_lock:
                features = state.encoder.encode(image)
        except Exception as e:
            return _error(500, f"encode failed: {e}")
        gh, gw, dim = features.shape
        data = np.ascontiguousarray(features, dtype="<f4").tobytes()
        return {
            "h": int(gh),
            "w": int(gw),
            "d": int(dim),
            "data": base64.b64encode(data).decode("ascii"),
        }

    @app.post("/v1/segment")
    async def segment(request: Request):
        if (resp := gate()) is not None:
            return resp
        try:
            body = await _json_object(request)
            image = _decode_image(body)
            points = _decode_prompts(body)
        except BadRequest as e:
            return _error(400, str(e))
        try:
            with state.infer_lock:
                mask, score = state.segmenter.segment(image, points)
        except Exception as e:
            return _error(500, f"segment failed: {e}")
        return {"mask": _mask_png_b64(mask), "score": float(score)}

    return app
