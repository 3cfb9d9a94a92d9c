from __future__ import annotations

import warnings
from contextlib import contextmanager

import pytest

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    from fastapi.testclient import TestClient

from encoder_service.app import create_app
from encoder_service.backends import build_backend
from encoder_service.config import EncoderConfig


@contextmanager
def running(cfg: EncoderConfig, factory=build_backend):
    """A served app whose backend has finished loading."""
    app = create_app(cfg, backend_factory=factory)
    with TestClient(app) as client:
        assert app.state.encoder_ready.wait(10), "backend never became ready"
        yield client


@pytest.fixture
def client():
    with running(EncoderConfig(model="hash://16", max_batch=8)) as c:
        yield c
