"""HTTP client for the model-serving wire protocol.

Endpoints:
    POST /v1/encode   {"image": <b64 PNG>} ->
        {"h": int, "w": int, "d": int, "data": <b64 f32-LE row-major channel-last>}
    POST /v1/segment  {"image": <b64 PNG>, "points": [[x, y], ...], "labels": [1, ...]} ->
        {"mask": <b64 single-channel PNG, 0/255>, "score": float}
    GET  /v1/health   -> {"status": "ok", "encoder": str, "segmenter": str}

Errors come back as HTTP 400 with {"error": str}; 503 means models are
still loading. Requests are idempotent, so transient failures retry.
"""

from __future__ import annotations

import base64
import threading
import time
from typing import Optional, Tuple

import numpy as np
import requests

from .backend import BackendError, BackendInfo, EncoderBackend, SegmenterBackend, TransportError
from .core import BinaryMask, Image, PointSet
from .matching import FeatureMap
from .pngio import image_to_png_bytes, mask_from_png_bytes

__all__ = ["RemoteEncoder", "RemoteSegmenter", "check_health"]

ENCODE_PATH = "/v1/encode"
SEGMENT_PATH = "/v1/segment"
HEALTH_PATH = "/v1/health"

_RETRY_DELAY = 0.2


class _RemoteBase:
    def __init__(self, base_url: str, timeout: float, retries: int, max_in_flight: int):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        # honors the backend's declared concurrency limit client-side
        self._slot = threading.Semaphore(max_in_flight)

    def _post(self, path: str, payload: dict) -> dict:
        url = self.base_url + path
        last: Optional[str] = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(_RETRY_DELAY * attempt)
            try:
                with self._slot:
                    resp = requests.post(url, json=payload, timeout=self.timeout)
            except requests.RequestException as e:
                last = f"{type(e).__name__}: {e}"
                continue
            if resp.status_code == 503:
                last = "backend still loading (503)"
                continue
            if resp.status_code == 400:
                raise BackendError(f"backend rejected request: {_error_text(resp)}")
            if resp.status_code != 200:
                last = f"HTTP {resp.status_code}: {_error_text(resp)}"
                continue
            try:
                return resp.json()
            except ValueError as e:
                raise BackendError(f"backend returned unparsable JSON: {e}") from e
        raise TransportError(f"{url} unreachable after {self.retries + 1} attempts: {last}")


def _error_text(resp: requests.Response) -> str:
    try:
        body = resp.json()
        return str(body.get("error", body))
    except ValueError:
        return resp.text[:200]


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


class RemoteEncoder(_RemoteBase, EncoderBackend):
    """Feature extraction over HTTP. Declared grid/dim are verified when given."""

    def __init__(
        self,
        base_url: str,
        *,
        grid: Optional[Tuple[int, int]] = None,
        dim: Optional[int] = None,
        timeout: float = 60.0,
        retries: int = 2,
        max_in_flight: int = 1,
    ):
        super().__init__(base_url, timeout, retries, max_in_flight)
        self.info = BackendInfo(
            name=f"remote-encoder@{self.base_url}",
            grid=grid,
            dim=dim,
            max_in_flight=max_in_flight,
        )

    def encode(self, image: Image) -> FeatureMap:
        body = self._post(ENCODE_PATH, {"image": _b64(image_to_png_bytes(image))})
        try:
            h, w, d = int(body["h"]), int(body["w"]), int(body["d"])
            raw = base64.b64decode(body["data"])
        except (KeyError, TypeError, ValueError) as e:
            raise BackendError(f"malformed encode response: {e}") from e
        if len(raw) != h * w * d * 4:
            raise BackendError(
                f"malformed tensor payload: {h}x{w}x{d} needs {h * w * d * 4} bytes, got {len(raw)}"
            )
        fm = FeatureMap(np.frombuffer(raw, dtype="<f4").reshape(h, w, d))
        return self._check_output(fm)


class RemoteSegmenter(_RemoteBase, SegmenterBackend):
    """Promptable segmentation over HTTP; prompts carry positive labels only."""

    def __init__(
        self,
        base_url: str,
        *,
        timeout: float = 60.0,
        retries: int = 2,
        max_in_flight: int = 1,
    ):
        super().__init__(base_url, timeout, retries, max_in_flight)
        self.info = BackendInfo(
            name=f"remote-segmenter@{self.base_url}", max_in_flight=max_in_flight
        )

    def segment(self, image: Image, prompts: PointSet) -> BinaryMask:
        self._check_prompts(image, prompts)
        payload = {
            "image": _b64(image_to_png_bytes(image)),
            "points": [[float(p.x), float(p.y)] for p in prompts],
            "labels": [1] * len(prompts),
        }
        body = self._post(SEGMENT_PATH, payload)
        try:
            raw = base64.b64decode(body["mask"])
        except (KeyError, TypeError, ValueError) as e:
            raise BackendError(f"malformed segment response: {e}") from e
        try:
            mask = mask_from_png_bytes(raw)
        except ValueError as e:
            raise BackendError(f"backend returned an undecodable mask: {e}") from e
        if (mask.height, mask.width) != (image.height, image.width):
            raise BackendError(
                f"mask {mask.height}x{mask.width} does not match "
                f"image {image.height}x{image.width}"
            )
        return mask


def check_health(base_url: str, timeout: float = 5.0, retries: int = 1) -> dict:
    """GET /v1/health; returns the body or raises TransportError."""
    url = base_url.rstrip("/") + HEALTH_PATH
    last: Optional[str] = None
    for attempt in range(retries + 1):
        if attempt:
            time.sleep(_RETRY_DELAY * attempt)
        try:
            resp = requests.get(url, timeout=timeout)
        except requests.RequestException as e:
            last = f"{type(e).__name__}: {e}"
            continue
        if resp.status_code == 200:
            try:
                body = resp.json()
            except ValueError as e:
                raise TransportError(f"{url} returned unparsable JSON: {e}") from e
            if body.get("status") != "ok":
                raise TransportError(f"{url} reports status {body.get('status')!r}")
            return body
        last = f"HTTP {resp.status_code}"
    raise TransportError(f"{url} unreachable after {retries + 1} attempts: {last}")
