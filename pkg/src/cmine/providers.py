"""Embedding providers and the content-addressed vector cache.

The wire protocol is ``POST {base}/embed`` with ``{"texts": [...]}`` returning
``{"model": ..., "dim": d, "vectors": [[...], ...]}`` and ``GET {base}/health``.
Because the encoder is frozen, identical text always maps to an identical
vector, which makes content-hash caching sound.
"""

from __future__ import annotations

import hashlib
import logging
import struct
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Protocol, Sequence

import httpx
import numpy as np

from .errors import ConfigError, ProviderError

log = logging.getLogger(__name__)

_MAX_ATTEMPTS = 3
_BACKOFF_BASE_S = 0.5


class EmbedProvider(Protocol):
    """Anything that can turn a batch of texts into vectors."""

    provider_id: str
    model_id: str

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


class HashEmbedProvider:
    """Deterministic text-hash featurizer; the offline stand-in for a real encoder.

    Each text seeds an RNG from its digest, so the mapping is frozen by
    construction: same text, same vector, on any machine.
    """

    def __init__(self, dim: int = 64, model_id: str = "hash-v1"):
        if dim < 1:
            raise ConfigError("embedding dim must be >= 1")
        self.dim = int(dim)
        self.provider_id = f"hash:{dim}"
        self.model_id = model_id

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = np.empty((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            digest = hashlib.blake2b(
                text.encode("utf-8"), key=self.model_id.encode("utf-8"), digest_size=8
            ).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            out[i] = rng.standard_normal(self.dim).astype(np.float32)
        return out


class HttpEmbedProvider:
    """Client for the embed wire protocol with bounded retries."""

    def __init__(
        self,
        base_url: str,
        client: httpx.Client | None = None,
        timeout: float = 60.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self.provider_id = self.base_url
        self._client = client or httpx.Client(timeout=timeout)
        self._sleep = sleep
        self.model_id = "unknown"
        self.dim: int | None = None

    def health(self) -> dict:
        resp = self._client.get(self.base_url + "/health")
        resp.raise_for_status()
        info = resp.json()
        self.model_id = info.get("model", self.model_id)
        if "dim" in info:
            self.dim = int(info["dim"])
        return info

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        last_error: Exception | None = None
        for attempt in range(_MAX_ATTEMPTS):
            if attempt:
                self._sleep(_BACKOFF_BASE_S * 2 ** (attempt - 1))
            try:
                resp = self._client.post(self.base_url + "/embed", json={"texts": list(texts)})
                resp.raise_for_status()
                payload = resp.json()
            except (httpx.HTTPError, ValueError) as exc:
                last_error = exc
                log.warning("embed attempt %d/%d failed: %s", attempt + 1, _MAX_ATTEMPTS, exc)
                continue
            self.model_id = payload.get("model", self.model_id)
            vectors = np.asarray(payload["vectors"], dtype=np.float32)
            if vectors.ndim == 1:
                vectors = vectors.reshape(len(texts), -1)
            self.dim = int(payload.get("dim", vectors.shape[1] if vectors.size else 0))
            return vectors
        raise ProviderError(f"embed failed after {_MAX_ATTEMPTS} attempts: {last_error}")


def provider_from_url(url: str, client: httpx.Client | None = None) -> EmbedProvider:
    """Build a provider from a config URL; ``hash://<dim>`` selects the offline featurizer."""
    if url.startswith("hash://"):
        spec = url[len("hash://") :]
        try:
            dim = int(spec)
        except ValueError:
            raise ConfigError(f"bad hash provider url {url!r}; expected hash://<dim>") from None
        return HashEmbedProvider(dim=dim)
    return HttpEmbedProvider(url, client=client)


class EmbedCache:
    """Vector cache keyed by (provider id, model id, text) content hash.

    In-memory always; optionally persisted to ``directory`` as one file per
    key, written via temp + rename so concurrent inserts of the same key are
    last-write-wins with identical content.
    """

    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory is not None else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
        self._mem: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    @staticmethod
    def key(provider_id: str, model_id: str, text: str) -> str:
        h = hashlib.sha256()
        for part in (provider_id, model_id, text):
            h.update(part.encode("utf-8"))
            h.update(b"\x00")
        return h.hexdigest()

    def get(self, key: str) -> np.ndarray | None:
        with self._lock:
            hit = self._mem.get(key)
        if hit is not None:
            return hit
        if self.directory is None:
            return None
        path = self.directory / f"{key}.vec"
        try:
            blob = path.read_bytes()
        except OSError:
            return None
        (dim,) = struct.unpack_from("<I", blob)
        vec = np.frombuffer(blob, dtype="<f4", offset=4)
        if vec.shape[0] != dim:
            return None  # torn write; treat as a miss
        vec = vec.copy()
        with self._lock:
            self._mem[key] = vec
        return vec

    def put(self, key: str, vector: np.ndarray) -> None:
        vec = np.ascontiguousarray(vector, dtype="<f4")
        with self._lock:
            self._mem[key] = vec
        if self.directory is None:
            return
        path = self.directory / f"{key}.vec"
        tmp = path.with_name(f"{key}.{threading.get_ident()}.tmp")
        with tmp.open("wb") as fh:
            fh.write(struct.pack("<I", vec.shape[0]))
            fh.write(vec.tobytes())
        tmp.replace(path)

    def __len__(self) -> int:
        with self._lock:
            return len(self._mem)


def embed_batch(
    provider: EmbedProvider,
    texts: Sequence[str],
    cache: EmbedCache | None = None,
    expected_dim: int | None = None,
    batch_size: int = 64,
    max_in_flight: int = 4,
) -> np.ndarray:
    """Embed texts order-preservingly, serving repeats and cached entries without re-encoding.

    Duplicate texts are embedded once. A dimension that disagrees with
    ``expected_dim`` is a fatal configuration error, not a retryable one.
    """
    if not texts:
        raise ValueError("texts must be non-empty")
    n = len(texts)
    vectors: list[np.ndarray | None] = [None] * n

    missing: dict[str, list[int]] = {}
    for i, text in enumerate(texts):
        if cache is not None:
            hit = cache.get(EmbedCache.key(provider.provider_id, provider.model_id, text))
            if hit is not None:
                vectors[i] = hit
                continue
        missing.setdefault(text, []).append(i)

    unique = list(missing)
    chunks = [unique[i : i + batch_size] for i in range(0, len(unique), batch_size)]

    def run_chunk(chunk: list[str]) -> np.ndarray:
        return provider.embed(chunk)

    if len(chunks) > 1 and max_in_flight > 1:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            results = list(pool.map(run_chunk, chunks))
    else:
        results = [run_chunk(chunk) for chunk in chunks]

    for chunk, mat in zip(chunks, results):
        if len(mat) != len(chunk):
            raise ProviderError(f"provider returned {len(mat)} vectors for {len(chunk)} texts")
        for text, vec in zip(chunk, mat):
            if expected_dim is not None and vec.shape[0] != expected_dim:
                raise ConfigError(
                    f"provider dim {vec.shape[0]} does not match configured dim {expected_dim}"
                )
            vec = np.asarray(vec, dtype=np.float32)
            if cache is not None:
                cache.put(EmbedCache.key(provider.provider_id, provider.model_id, text), vec)
            for i in missing[text]:
                vectors[i] = vec

    filled = [v for v in vectors if v is not None]
    if len(filled) != n:
        raise ProviderError("provider response left texts without vectors")
    if expected_dim is not None:
        for v in filled:
            if v.shape[0] != expected_dim:
                raise ConfigError(
                    f"provider dim {v.shape[0]} does not match configured dim {expected_dim}"
                )
    return np.stack(filled).astype(np.float32, copy=False)
