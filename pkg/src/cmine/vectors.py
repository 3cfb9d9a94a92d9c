"""Embedding storage: the id-indexed float32 matrix, distance kernels, and the binary file format.

File format: magic ``CMV1`` | u32 LE dim | u64 LE row count | row-major f32 LE
payload, with a JSONL sidecar (``<path>.index.jsonl``) carrying
``{"id": ..., "lang": ..., "row": n}`` per row.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, VectorFormatError

MAGIC = b"CMV1"
_HEADER = struct.Struct("<4sIQ")


def as_vector(values: Sequence[float] | np.ndarray, dim: int | None = None) -> np.ndarray:
    """Coerce to a finite float32 vector, optionally checking its length."""
    v = np.asarray(values, dtype=np.float32)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DomainError("vector contains NaN or Inf")
    if dim is not None and v.shape[0] != dim:
        raise VectorFormatError(f"vector length {v.shape[0]} != expected dim {dim}")
    return v


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Immutable id-indexed embedding matrix with a per-row language tag."""

    ids: tuple[str, ...]
    langs: tuple[str, ...]
    rows: np.ndarray  # (n, dim) float32, read-only

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float32)
        if rows.ndim != 2:
            raise ValueError(f"rows must be 2-d, got shape {rows.shape}")
        if len(self.ids) != rows.shape[0] or len(self.langs) != rows.shape[0]:
            raise ValueError("ids, langs and rows must have matching lengths")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("ids must be unique")
        if rows.size and not np.all(np.isfinite(rows)):
            raise DomainError("matrix contains NaN or Inf")
        rows = rows.copy()
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "_row_of", {i: n for n, i in enumerate(self.ids)})

    def __len__(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return int(self.rows.shape[1])

    def row_index(self, doc_id: str) -> int:
        try:
            return self._row_of[doc_id]
        except KeyError:
            raise KeyError(f"no vector for id {doc_id!r}") from None

    def vector(self, doc_id: str) -> np.ndarray:
        return self.rows[self.row_index(doc_id)]

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._row_of

    def subset(self, indices: Iterable[int]) -> "EmbeddingMatrix":
        idx = list(indices)
        return EmbeddingMatrix(
            ids=tuple(self.ids[i] for i in idx),
            langs=tuple(self.langs[i] for i in idx),
            rows=self.rows[idx] if idx else np.zeros((0, self.dim), dtype=np.float32),
        )

    @classmethod
    def empty(cls, dim: int) -> "EmbeddingMatrix":
        return cls(ids=(), langs=(), rows=np.zeros((0, dim), dtype=np.float32))


def distance(u: np.ndarray, v: np.ndarray, metric: str = "euclidean") -> float:
    """Distance between two vectors: ``euclidean`` or ``cosine`` (1 - cosine similarity)."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"vector shapes differ: {u.shape} vs {v.shape}")
    if metric == "euclidean":
        return float(np.sqrt(np.sum((u - v) ** 2)))
    if metric == "cosine":
        nu = np.sqrt(np.sum(u * u))
        nv = np.sqrt(np.sum(v * v))
        if nu == 0.0 or nv == 0.0:
            raise DomainError("cosine distance is undefined for the zero vector")
        sim = float(np.dot(u, v) / (nu * nv))
        # guard rounding drift so the result stays in [0, 2]
        sim = min(1.0, max(-1.0, sim))
        return 1.0 - sim
    raise ValueError(f"unknown metric {metric!r}")


def _index_path(path: Path) -> Path:
    return path.with_name(path.name + ".index.jsonl")


def write_vectors(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Write the binary vector file plus its JSONL index sidecar atomically."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, matrix.dim, len(matrix)))
        fh.write(np.ascontiguousarray(matrix.rows, dtype="<f4").tobytes())
    tmp.replace(path)

    idx_tmp = _index_path(path).with_suffix(".tmp")
    with idx_tmp.open("w", encoding="utf-8") as fh:
        for row, (doc_id, lang) in enumerate(zip(matrix.ids, matrix.langs)):
            fh.write(json.dumps({"id": doc_id, "lang": lang, "row": row}, ensure_ascii=False) + "\n")
    idx_tmp.replace(_index_path(path))


def read_vectors(path: str | Path) -> EmbeddingMatrix:
    """Read a binary vector file written by :func:`write_vectors`; bit-exact roundtrip."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise VectorFormatError(f"cannot read vector file {path}: {exc}") from exc
    if len(blob) < _HEADER.size:
        raise VectorFormatError(f"{path}: truncated header")
    magic, dim, count = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise VectorFormatError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 4 * dim * count
    if len(blob) != expected:
        raise VectorFormatError(f"{path}: payload is {len(blob)} bytes, expected {expected}")
    rows = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(count, dim).copy()

    ids: list[str] = []
    langs: list[str] = []
    idx_path = _index_path(path)
    try:
        idx_raw = idx_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise VectorFormatError(f"cannot read index sidecar {idx_path}: {exc}") from exc
    for line in idx_raw.splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        if rec["row"] != len(ids):
            raise VectorFormatError(f"{idx_path}: rows out of order at {rec['row']}")
        ids.append(rec["id"])
        langs.append(rec["lang"])
    if len(ids) != count:
        raise VectorFormatError(f"{idx_path}: {len(ids)} index rows for {count} vectors")
    return EmbeddingMatrix(ids=tuple(ids), langs=tuple(langs), rows=rows)
