import struct

import numpy as np
import pytest

from cmine.errors import VectorFormatError
from cmine.vectors import EmbeddingMatrix, as_vector, distance, read_vectors, write_vectors


def _matrix(n: int = 4, d: int = 3) -> EmbeddingMatrix:
    rng = np.random.default_rng(0)
    return EmbeddingMatrix(
        ids=tuple(f"id{i}" for i in range(n)),
        langs=tuple("en" if i % 2 == 0 else "de" for i in range(n)),
        rows=rng.normal(size=(n, d)).astype(np.float32),
    )


def test_roundtrip_exact(tmp_path) -> None:
    m = _matrix()
    path = tmp_path / "v.cmv"
    write_vectors(m, path)
    back = read_vectors(path)
    assert back.ids == m.ids
    assert back.langs == m.langs
    assert back.rows.dtype == np.float32
    np.testing.assert_array_equal(back.rows, m.rows)


def test_header_layout(tmp_path) -> None:
    m = _matrix(n=5, d=7)
    path = tmp_path / "v.cmv"
    write_vectors(m, path)
    blob = path.read_bytes()
    assert blob[:4] == b"CMV1"
    dim, count = struct.unpack("<IQ", blob[4:16])
    assert (dim, count) == (7, 5)
    assert len(blob) == 16 + 5 * 7 * 4


def test_bad_magic_rejected(tmp_path) -> None:
    m = _matrix()
    path = tmp_path / "v.cmv"
    write_vectors(m, path)
    blob = bytearray(path.read_bytes())
    blob[:4] = b"XXXX"
    path.write_bytes(bytes(blob))
    with pytest.raises(VectorFormatError):
        read_vectors(path)


def test_truncated_payload_rejected(tmp_path) -> None:
    m = _matrix()
    path = tmp_path / "v.cmv"
    write_vectors(m, path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-4])
    with pytest.raises(VectorFormatError):
        read_vectors(path)


def test_missing_sidecar_rejected(tmp_path) -> None:
    m = _matrix()
    path = tmp_path / "v.cmv"
    write_vectors(m, path)
    (tmp_path / "v.cmv.index.jsonl").unlink()
    with pytest.raises(VectorFormatError):
        read_vectors(path)


def test_subset_and_lookup() -> None:
    m = _matrix(n=6)
    sub = m.subset([4, 1])
    assert sub.ids == ("id4", "id1")
    np.testing.assert_array_equal(sub.rows[0], m.rows[4])
    assert m.row_index("id3") == 3
    assert "id3" in m
    assert "nope" not in m
    with pytest.raises(KeyError):
        m.row_index("nope")


def test_duplicate_ids_rejected() -> None:
    with pytest.raises(ValueError):
        EmbeddingMatrix(
            ids=("a", "a"), langs=("en", "en"), rows=np.zeros((2, 2), dtype=np.float32)
        )


def test_as_vector_checks_dim() -> None:
    v = as_vector([1.0, 2.0], dim=2)
    assert v.dtype == np.float32
    with pytest.raises(VectorFormatError):
        as_vector([1.0, 2.0], dim=3)


def test_distance_metrics() -> None:
    u = np.array([1.0, 0.0])
    v = np.array([0.0, 1.0])
    assert distance(u, v, "euclidean") == pytest.approx(np.sqrt(2))
    assert distance(u, v, "cosine") == pytest.approx(1.0)
    assert distance(u, u, "cosine") == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        distance(u, v, "manhattan")
