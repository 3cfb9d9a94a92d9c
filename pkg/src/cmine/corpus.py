"""Corpus ingestion: JSONL loading, stratified sampling, category pruning, sequence building.

Corpus files are JSONL, one object per line:
    {"id": "...", "title": "...", "paragraphs": ["...", ...], "lang": "zh", "tags": ["DATE", ...]}
``tags`` is optional and defaults to empty.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorpusFormatError
from .seeds import derive_seed

log = logging.getLogger(__name__)

# Functional NER categories that are pruned by default: dates, times and
# number-like entities carry no cultural signal.
DEFAULT_BLOCKLIST = frozenset(
    {"DATE", "TIME", "CARDINAL", "ORDINAL", "QUANTITY", "PERCENT", "MONEY"}
)

# The >10% malformed-line abort only applies to files with at least this many
# lines; tiny files always use the skip-and-count path.
_MALFORMED_RATE_MIN_LINES = 10
_MALFORMED_RATE_LIMIT = 0.10


@dataclass(frozen=True)
class Document:
    """One corpus entry: a title plus its body paragraphs."""

    id: str
    title: str
    paragraphs: tuple[str, ...]
    lang: str
    tags: frozenset[str] = field(default_factory=frozenset)


@dataclass(frozen=True)
class DocumentSet:
    """Immutable collection of documents with O(1) per-language counts."""

    docs: tuple[Document, ...]
    provenance: str = ""
    seed: int | None = None

    def __post_init__(self):
        seen: set[str] = set()
        counts: dict[str, int] = {}
        for doc in self.docs:
            if doc.id in seen:
                raise CorpusFormatError(f"duplicate document id {doc.id!r}")
            seen.add(doc.id)
            counts[doc.lang] = counts.get(doc.lang, 0) + 1
        object.__setattr__(self, "_lang_counts", counts)

    def __len__(self) -> int:
        return len(self.docs)

    @property
    def lang_counts(self) -> dict[str, int]:
        return dict(self._lang_counts)

    def languages(self) -> list[str]:
        return sorted(self._lang_counts)

    def by_lang(self, lang: str) -> list[Document]:
        return [d for d in self.docs if d.lang == lang]


def _parse_record(obj: object, lang: str | None) -> Document | None:
    """Build a Document from one decoded JSONL object, or None if malformed."""
    if not isinstance(obj, dict):
        return None
    doc_id = obj.get("id")
    title = obj.get("title")
    if not isinstance(doc_id, str) or not doc_id:
        return None
    if not isinstance(title, str) or not title:
        return None
    rec_lang = obj.get("lang")
    if rec_lang is None:
        rec_lang = lang
    if not isinstance(rec_lang, str) or not rec_lang:
        return None
    if lang is not None and rec_lang != lang:
        return None
    paragraphs = obj.get("paragraphs", [])
    if not isinstance(paragraphs, list) or any(not isinstance(p, str) for p in paragraphs):
        return None
    tags = obj.get("tags", [])
    if not isinstance(tags, list) or any(not isinstance(t, str) for t in tags):
        return None
    return Document(
        id=doc_id,
        title=title,
        paragraphs=tuple(paragraphs),
        lang=rec_lang,
        tags=frozenset(tags),
    )


def load_corpus(path: str | Path, lang: str | None = None) -> tuple[DocumentSet, int]:
    """Load a JSONL corpus file, returning the document set and the malformed-line count.

    ``lang`` pins the expected language: records without a ``lang`` field are
    stamped with it, records that disagree count as malformed. Malformed lines
    are skipped; if more than 10% of a non-trivial file is malformed the whole
    load aborts.
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusFormatError(f"cannot read corpus file {path}: {exc}") from exc

    docs: list[Document] = []
    skipped = 0
    total = 0
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        total += 1
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            skipped += 1
            log.debug("%s:%d: invalid JSON, skipped", path, lineno)
            continue
        doc = _parse_record(obj, lang)
        if doc is None:
            skipped += 1
            log.debug("%s:%d: malformed record, skipped", path, lineno)
            continue
        docs.append(doc)

    if total >= _MALFORMED_RATE_MIN_LINES and skipped > _MALFORMED_RATE_LIMIT * total:
        raise CorpusFormatError(
            f"{path}: {skipped}/{total} malformed lines exceeds the "
            f"{_MALFORMED_RATE_LIMIT:.0%} tolerance"
        )
    return DocumentSet(docs=tuple(docs), provenance=str(path)), skipped


def stratified_sample(
    dset: DocumentSet, quotas: dict[str, int], seed: int
) -> tuple[DocumentSet, list[str]]:
    """Sample per-language quotas uniformly without replacement, deterministically.

    Languages absent from ``quotas`` are dropped. A quota above the available
    count keeps everything for that language and adds a warning. Selected
    documents keep their original corpus order, languages are emitted in
    sorted order, so identical inputs give byte-identical output.
    """
    if any(q < 0 for q in quotas.values()):
        raise ValueError("quotas must be non-negative")
    warnings: list[str] = []
    out: list[Document] = []
    for lang in sorted(quotas):
        quota = quotas[lang]
        pool = dset.by_lang(lang)
        if quota >= len(pool):
            if quota > len(pool):
                warnings.append(
                    f"quota {quota} for {lang!r} exceeds available {len(pool)}; keeping all"
                )
            out.extend(pool)
            continue
        rng = np.random.default_rng(derive_seed(seed, "sample", lang))
        chosen = rng.choice(len(pool), size=quota, replace=False)
        chosen.sort()
        out.extend(pool[i] for i in chosen)
    return DocumentSet(docs=tuple(out), provenance=dset.provenance, seed=seed), warnings


def prune_by_category(dset: DocumentSet, blocklist: frozenset[str] | set[str] = DEFAULT_BLOCKLIST) -> DocumentSet:
    """Drop documents whose tag set intersects ``blocklist``; untagged documents always survive."""
    block = frozenset(blocklist)
    if not block:
        raise ValueError("blocklist must be non-empty")
    kept = tuple(d for d in dset.docs if not (d.tags & block))
    return DocumentSet(docs=kept, provenance=dset.provenance, seed=dset.seed)


def make_sequence(doc: Document) -> str:
    """Title plus the leading paragraph, newline-separated; title alone if there are no paragraphs."""
    if doc.paragraphs:
        return f"{doc.title}\n{doc.paragraphs[0]}"
    return doc.title


def segment_units(doc: Document) -> list[str]:
    """The document's paragraphs with empty / whitespace-only units dropped, order preserved."""
    return [p for p in doc.paragraphs if p.strip()]


def write_corpus(dset: DocumentSet, path: str | Path) -> None:
    """Write a document set back to corpus JSONL (stable field order)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for doc in dset.docs:
            rec = {
                "id": doc.id,
                "title": doc.title,
                "paragraphs": list(doc.paragraphs),
                "lang": doc.lang,
                "tags": sorted(doc.tags),
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    tmp.replace(path)
