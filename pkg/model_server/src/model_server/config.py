"""Server configuration from defaults, environment, and flags.

Precedence is conventional: command-line flags beat environment
variables beat defaults. Environment names are the flag names
uppercased and prefixed with MODEL_SERVER_.
"""

from __future__ import annotations

import argparse
import os
from dataclasses import dataclass
from typing import Optional, Sequence

from .models import DEFAULT_ENCODER_ID, DEFAULT_SEGMENTER_ID

ENV_PREFIX = "MODEL_SERVER_"


@dataclass(frozen=True)
class ServerConfig:
    encoder: str = DEFAULT_ENCODER_ID
    segmenter: str = DEFAULT_SEGMENTER_ID
    device: str = "cpu"
    port: int = 8080


def _env(name: str, environ) -> Optional[str]:
    return environ.get(ENV_PREFIX + name.upper())


def config_from_args(argv: Optional[Sequence[str]] = None, environ=None) -> ServerConfig:
    environ = os.environ if environ is None else environ
    parser = argparse.ArgumentParser(
        prog="model-server",
        description="HTTP encode/segment service for the sparseprompt pipeline",
    )
    parser.add_argument("--port", type=int, default=None)
    parser.add_argument("--device", default=None)
    parser.add_argument("--encoder", default=None, help="checkpoint id or stub:* id")
    parser.add_argument("--segmenter", default=None, help="checkpoint id or stub:* id")
    args = parser.parse_args(argv)

    defaults = ServerConfig()
    port_env = _env("port", environ)
    try:
        port = args.port if args.port is not None else (
            int(port_env) if port_env is not None else defaults.port
        )
    except ValueError:
        raise SystemExit(f"MODEL_SERVER_PORT must be an integer, got {port_env!r}")
    return ServerConfig(
        encoder=args.encoder or _env("encoder", environ) or defaults.encoder,
        segmenter=args.segmenter or _env("segmenter", environ) or defaults.segmenter,
        device=args.device or _env("device", environ) or defaults.device,
        port=port,
    )
