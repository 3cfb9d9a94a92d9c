"""Embedding backends behind the wire protocol.

``hash://<dim>`` model ids select a keyed-digest featurizer: each text seeds
an RNG from its digest, so the text-to-vector mapping is frozen by
construction and survives restarts bit for bit. Any other model id is treated
as a sentence-transformers checkpoint, imported lazily so the common offline
path never pays for torch.
"""

from __future__ import annotations

import hashlib
from typing import Protocol, Sequence

import numpy as np


class EncoderBackend(Protocol):
    model_id: str
    dim: int

    def encode(self, texts: Sequence[str]) -> np.ndarray: ...


class HashBackend:
    """Deterministic stand-in for model weights."""

    def __init__(self, dim: int, model_id: str = "hash-v1"):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.dim = int(dim)
        self.model_id = model_id

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        out = np.empty((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            digest = hashlib.blake2b(
                text.encode("utf-8"), key=self.model_id.encode("utf-8"), digest_size=8
            ).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            out[i] = rng.standard_normal(self.dim).astype(np.float32)
        return out


class TransformerBackend:
    """A frozen sentence-transformers checkpoint run in deterministic eval mode."""

    def __init__(self, model_id: str):
        try:
            import torch
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise RuntimeError(
                f"model {model_id!r} needs the sentence-transformers package"
            ) from exc
        torch.manual_seed(0)
        self.model_id = model_id
        self._model = SentenceTransformer(model_id)
        self._model.eval()
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        vectors = self._model.encode(
            list(texts), convert_to_numpy=True, normalize_embeddings=False
        )
        return np.asarray(vectors, dtype=np.float32)


def build_backend(model: str) -> EncoderBackend:
    if model.startswith("hash://"):
        tail = model[len("hash://") :]
        try:
            dim = int(tail)
        except ValueError:
            raise ValueError(f"bad model {model!r}; expected hash://<dim>") from None
        return HashBackend(dim)
    return TransformerBackend(model)
