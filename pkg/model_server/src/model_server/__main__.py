"""Entry point: validate the configured checkpoints, then serve."""

from __future__ import annotations

import sys
from typing import Optional, Sequence

from .app import create_app
from .config import config_from_args
from .models import CheckpointError, check_resolvable


def main(argv: Optional[Sequence[str]] = None) -> int:
    config = config_from_args(argv)
    try:
        check_resolvable(config.encoder, config.segmenter)
    except CheckpointError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    import uvicorn

    # heavyweight checkpoints stream in behind a 503 instead of
    # blocking the socket from opening
    app = create_app(config, load_in_background=True)
    uvicorn.run(app, host="127.0.0.1", port=config.port, log_level="info")
    return 0


if __name__ == "__main__":
    sys.exit(main())
