import base64
import io

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image as PILImage

from model_server import STUB_ENCODER_ID, STUB_SEGMENTER_ID, ServerConfig, create_app


def png_b64(arr: np.ndarray) -> str:
    buf = io.BytesIO()
    PILImage.fromarray(arr).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_mask(b64: str) -> np.ndarray:
    img = PILImage.open(io.BytesIO(base64.b64decode(b64)))
    return np.asarray(img)


def rect_scene(h: int, w: int, rect, rgb: bool = True):
    """Flat background with one colored rectangle; returns (image, gt)."""
    y0, y1, x0, x1 = rect
    if rgb:
        img = np.full((h, w, 3), (30, 40, 110), dtype=np.uint8)
        img[y0:y1, x0:x1] = (210, 170, 60)
    else:
        img = np.full((h, w), 30, dtype=np.uint8)
        img[y0:y1, x0:x1] = 205
    gt = np.zeros((h, w), dtype=bool)
    gt[y0:y1, x0:x1] = True
    return img, gt


def iou_of(a: np.ndarray, b: np.ndarray) -> float:
    union = np.logical_or(a, b).sum()
    return float(np.logical_and(a, b).sum() / union) if union else 1.0


@pytest.fixture(scope="session")
def stub_config():
    return ServerConfig(
        encoder=STUB_ENCODER_ID, segmenter=STUB_SEGMENTER_ID, device="cpu", port=0
    )


@pytest.fixture(scope="session")
def client(stub_config):
    with TestClient(create_app(stub_config)) as c:
        yield c
