"""Run the service locally: python -m encoder_service."""

from __future__ import annotations

import uvicorn

from .app import create_app
from .config import from_env


def main() -> None:
    cfg = from_env()
    uvicorn.run(create_app(cfg), host="127.0.0.1", port=cfg.port)


if __name__ == "__main__":
    main()
