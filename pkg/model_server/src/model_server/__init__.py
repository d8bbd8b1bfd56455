"""HTTP model server for the sparseprompt wire protocol.

Wraps a patch-feature encoder and a point-promptable segmenter behind
three endpoints (/v1/encode, /v1/segment, /v1/health). Ships
deterministic stub models with real-model geometry for offline use;
Hugging Face checkpoints load through the [models] extra.
"""

from .app import MAX_IN_FLIGHT, create_app
from .config import ENV_PREFIX, ServerConfig, config_from_args
from .letterbox import Letterbox
from .models import (
    DEFAULT_ENCODER_ID,
    DEFAULT_SEGMENTER_ID,
    ENCODER_PATCH,
    ENCODER_SIDE,
    SEGMENTER_DEFAULTS,
    SEGMENTER_SIDE,
    STUB_ENCODER_ID,
    STUB_SEGMENTER_ID,
    CheckpointError,
    StubEncoder,
    StubSegmenter,
    check_resolvable,
    resolve_encoder,
    resolve_segmenter,
)

__all__ = [
    "CheckpointError",
    "DEFAULT_ENCODER_ID",
    "DEFAULT_SEGMENTER_ID",
    "ENCODER_PATCH",
    "ENCODER_SIDE",
    "ENV_PREFIX",
    "Letterbox",
    "MAX_IN_FLIGHT",
    "SEGMENTER_DEFAULTS",
    "SEGMENTER_SIDE",
    "STUB_ENCODER_ID",
    "STUB_SEGMENTER_ID",
    "ServerConfig",
    "StubEncoder",
    "StubSegmenter",
    "check_resolvable",
    "config_from_args",
    "create_app",
    "resolve_encoder",
    "resolve_segmenter",
]
