"""Shared fixtures: small corpora plus one session-scoped planted fixture run."""

from __future__ import annotations

import numpy as np
import pytest

from cmine.config import load_config
from cmine.corpus import Document, DocumentSet
from cmine.pipeline import generate_fixture, run_pipeline
from cmine.vectors import EmbeddingMatrix


def make_doc(
    doc_id: str,
    lang: str = "en",
    title: str | None = None,
    paragraphs: tuple[str, ...] = ("Lead paragraph.",),
    tags: tuple[str, ...] = (),
) -> Document:
    return Document(
        id=doc_id,
        title=title if title is not None else doc_id,
        paragraphs=paragraphs,
        lang=lang,
        tags=frozenset(tags),
    )


def make_docs(lang_sizes: dict[str, int]) -> DocumentSet:
    docs = []
    for lang in sorted(lang_sizes):
        for i in range(lang_sizes[lang]):
            docs.append(make_doc(f"{lang}-{i:03d}", lang=lang))
    return DocumentSet(docs=tuple(docs))


def matrix_for(dset: DocumentSet, rows: np.ndarray) -> EmbeddingMatrix:
    return EmbeddingMatrix(
        ids=tuple(d.id for d in dset.docs),
        langs=tuple(d.lang for d in dset.docs),
        rows=np.asarray(rows, dtype=np.float32),
    )


# A scaled-down planted fixture: 3 languages, enough entries for clusters to
# clear the stability floor, small enough that a full run takes well under a
# second. Used by pipeline, service and CLI tests.
TINY_KW = dict(
    languages=("aa", "bb", "cc"),
    n_universal=6,
    n_islands_per_lang=2,
    entries_per_lang=240,
    dim=16,
    sigma_in=0.05,
    delta=3.0,
)
TINY_K1 = 12
TINY_K2 = 16


def gen_tiny_fixture(out_dir, seed: int = 0, contaminate: bool = False) -> dict:
    from cmine.synthetic import SyntheticSpec

    spec = SyntheticSpec(contaminate_islands=contaminate, **TINY_KW)
    return generate_fixture(
        out_dir, seed=seed, spec=spec, contaminate=contaminate,
        k_stage1=TINY_K1, k_stage2=TINY_K2, pairs_per_lang=40,
    )


@pytest.fixture(scope="session")
def planted_run(tmp_path_factory) -> dict:
    """Full-size planted fixture mined once and shared by the acceptance tests."""
    import time

    root = tmp_path_factory.mktemp("planted")
    manifest = generate_fixture(root, seed=0)
    cfg = load_config(manifest["config"])
    start = time.perf_counter()
    cps, report = run_pipeline(cfg)
    elapsed = time.perf_counter() - start
    return {
        "root": root,
        "manifest": manifest,
        "config": cfg,
        "cps": cps,
        "report": report,
        "elapsed_s": elapsed,
    }


@pytest.fixture()
def tiny_run(tmp_path) -> dict:
    manifest = gen_tiny_fixture(tmp_path)
    cfg = load_config(manifest["config"])
    cps, report = run_pipeline(cfg)
    return {"root": tmp_path, "manifest": manifest, "config": cfg, "cps": cps, "report": report}
