"""Two-stage culture-point mining.

Stage 1 refines each language on its own: per-language K-Means, then within
each cluster a local-dispersion filter (keep entries strictly below the
cluster's median distance-to-neighbors) and a coherence-entropy filter (keep
the top fraction by H, ties included). Stage 2 pools the survivors, clusters
them globally, and keeps clusters that are both stable (size >= tau) and
dominated by one language (gamma strictly above theta).
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import Document, DocumentSet
from .errors import ConfigError, StageError
from .geometry import ClusterAssignment, coherence_entropy, kmeans, local_dispersion
from .seeds import derive_seed
from .vectors import EmbeddingMatrix

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MiningConfig:
    k_stage1: int = 256
    k_stage2: int = 1024
    k_nn: int = 5
    tau: int = 5
    theta: float = 0.8
    entropy_keep_fraction: float = 0.5
    top_n_central: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.theta <= 1.0:
            raise ConfigError(f"theta must be in (0, 1], got {self.theta}")
        if self.tau < 1:
            raise ConfigError(f"tau must be >= 1, got {self.tau}")
        if not 0.0 < self.entropy_keep_fraction <= 1.0:
            raise ConfigError(
                f"entropy_keep_fraction must be in (0, 1], got {self.entropy_keep_fraction}"
            )
        for name in ("k_stage1", "k_stage2", "k_nn", "top_n_central"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")

    def with_theta(self, theta: float) -> "MiningConfig":
        return replace(self, theta=theta)


@dataclass(frozen=True)
class Candidate:
    """One Stage-1 survivor. delta is None when its cluster was too small to score."""

    id: str
    lang: str
    delta: float | None
    entropy: float


@dataclass(frozen=True)
class CandidateSet:
    entries: tuple[Candidate, ...]
    matrix: EmbeddingMatrix  # survivor vectors, row i belongs to entries[i]
    config: MiningConfig
    per_language: dict[str, int]
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if tuple(c.id for c in self.entries) != self.matrix.ids:
            raise ValueError("candidate entries and matrix rows out of order")

    def __len__(self) -> int:
        return len(self.entries)

    def langs(self) -> list[str]:
        return [c.lang for c in self.entries]


@dataclass(frozen=True)
class SelectedCluster:
    cluster_id: int
    lang: str  # dominant language l*
    gamma: float
    size: int


@dataclass(frozen=True)
class CulturePoint:
    id: str
    title: str
    leading_paragraph: str
    lang: str
    cluster_id: int
    gamma: float
    cluster_size: int
    centrality_rank: int


def stage1_filter(
    rows: np.ndarray, entropies: np.ndarray, cfg: MiningConfig
) -> tuple[list[int], np.ndarray]:
    """Apply the density-then-entropy filter inside one cluster.

    Returns indices (into the cluster's row order) of retained entries plus
    every entry's local dispersion. Density keeps entries strictly below the
    median dispersion; the entropy cut keeps the top entropy_keep_fraction of
    those by H, with ties at the threshold kept.
    """
    deltas = local_dispersion(rows, cfg.k_nn)
    median = float(np.median(deltas))
    dense = [i for i in range(rows.shape[0]) if deltas[i] < median]
    if not dense:
        return [], deltas
    keep_count = math.floor(cfg.entropy_keep_fraction * len(dense))
    if keep_count == 0:
        return [], deltas
    threshold = sorted((entropies[i] for i in dense), reverse=True)[keep_count - 1]
    return [i for i in dense if entropies[i] >= threshold], deltas


def document_entropies(
    dset: DocumentSet, units: Mapping[str, np.ndarray] | None
) -> dict[str, float]:
    """Coherence entropy per document; 0 when a document has no usable units."""
    out: dict[str, float] = {}
    for doc in dset.docs:
        u = None if units is None else units.get(doc.id)
        if u is None or len(u) == 0:
            out[doc.id] = 0.0
        else:
            out[doc.id] = coherence_entropy(u)
    return out


def _stage1_one_language(
    lang: str,
    doc_ids: list[str],
    vectors: EmbeddingMatrix,
    entropies: Mapping[str, float],
    cfg: MiningConfig,
) -> tuple[list[Candidate], list[str]]:
    warnings: list[str] = []
    rows = vectors.rows[[vectors.row_index(i) for i in doc_ids]].astype(np.float64)
    k = cfg.k_stage1
    if k > len(doc_ids):
        k = len(doc_ids)
        warnings.append(f"{lang}: k_stage1 clamped to {k} (only {len(doc_ids)} documents)")
    assignment = kmeans(rows, k, seed=derive_seed(cfg.seed, "stage1", lang))

    ent = np.array([entropies[i] for i in doc_ids])
    out: list[Candidate] = []
    for c in range(assignment.k):
        members = assignment.members(c)
        if len(members) < cfg.k_nn + 2:
            warnings.append(
                f"{lang}: cluster {c} has {len(members)} entries, below the "
                f"dispersion minimum; passed through unfiltered"
            )
            for i in members:
                out.append(Candidate(doc_ids[i], lang, None, float(ent[i])))
            continue
        kept, deltas = stage1_filter(rows[members], ent[members], cfg)
        if not kept:
            warnings.append(f"{lang}: cluster {c} retained no entries")
        for j in kept:
            i = int(members[j])
            out.append(Candidate(doc_ids[i], lang, float(deltas[j]), float(ent[i])))
    return out, warnings


def run_stage1(
    dset: DocumentSet,
    vectors: EmbeddingMatrix,
    cfg: MiningConfig,
    units: Mapping[str, np.ndarray] | None = None,
    workers: int = 1,
) -> CandidateSet:
    """Per-language refinement over the whole corpus; returns the pooled survivor set."""
    missing = [d.id for d in dset.docs if d.id not in vectors]
    if missing:
        raise StageError(
            "stage1", f"{len(missing)} documents lack vectors (first: {missing[0]!r})"
        )
    entropies = document_entropies(dset, units)

    langs = dset.languages()
    ids_by_lang = {lang: [d.id for d in dset.by_lang(lang)] for lang in langs}

    def job(lang: str) -> tuple[list[Candidate], list[str]]:
        return _stage1_one_language(lang, ids_by_lang[lang], vectors, entropies, cfg)

    if workers > 1 and len(langs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = dict(zip(langs, pool.map(job, langs)))
    else:
        results = {lang: job(lang) for lang in langs}

    entries: list[Candidate] = []
    warnings: list[str] = []
    per_language: dict[str, int] = {}
    for lang in langs:
        got, warns = results[lang]
        entries.extend(got)
        warnings.extend(warns)
        per_language[lang] = len(got)

    if entries:
        matrix = vectors.subset([vectors.row_index(c.id) for c in entries])
    else:
        matrix = EmbeddingMatrix.empty(vectors.dim)
    for w in warnings:
        log.warning("stage1: %s", w)
    return CandidateSet(
        entries=tuple(entries),
        matrix=matrix,
        config=cfg,
        per_language=per_language,
        warnings=tuple(warnings),
    )


def dominance(cluster_langs: Sequence[str]) -> tuple[str, float]:
    """Modal language of a cluster and its share; ties go to the lexicographically first code."""
    if not cluster_langs:
        raise ValueError("empty cluster has no dominant language")
    counts = Counter(cluster_langs)
    top = max(counts.values())
    l_star = min(str(lang) for lang, c in counts.items() if c == top)
    return l_star, top / len(cluster_langs)


def run_stage2(candidates: CandidateSet, cfg: MiningConfig) -> ClusterAssignment:
    """Global clustering of the Stage-1 survivors in the shared embedding space."""
    n = len(candidates)
    if n == 0:
        return ClusterAssignment(
            k=0,
            assign=np.zeros(0, dtype=np.int64),
            centroids=np.zeros((0, candidates.matrix.dim), dtype=np.float32),
            inertia=0.0,
            seed=cfg.seed,
        )
    k = cfg.k_stage2
    if k > n:
        k = n
        log.warning("stage2: k_stage2 clamped to %d (only %d candidates)", k, n)
    return kmeans(candidates.matrix.rows, k, seed=derive_seed(cfg.seed, "stage2"))


def select_culture_clusters(
    assignment: ClusterAssignment, cluster_langs: Sequence[str], cfg: MiningConfig
) -> list[SelectedCluster]:
    """Keep clusters with size >= tau whose dominant-language share is strictly above theta."""
    langs = np.asarray(cluster_langs)
    selected: list[SelectedCluster] = []
    for c in range(assignment.k):
        members = assignment.members(c)
        if len(members) < cfg.tau:
            continue
        l_star, gamma = dominance(list(langs[members]))
        if gamma > cfg.theta:
            selected.append(SelectedCluster(c, l_star, gamma, len(members)))
    return selected


def rank_central(
    ids: Sequence[str], rows: np.ndarray, centroid: np.ndarray, n: int = 10
) -> list[str]:
    """Top-n ids by ascending Euclidean distance to the centroid, ties by id; n clamps to size."""
    diffs = np.asarray(rows, dtype=np.float64) - np.asarray(centroid, dtype=np.float64)
    dists = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
    order = sorted(range(len(ids)), key=lambda i: (dists[i], ids[i]))
    return [ids[i] for i in order[: min(n, len(ids))]]


def extract_culture_points(
    dset: DocumentSet,
    candidates: CandidateSet,
    assignment: ClusterAssignment,
    selected: Sequence[SelectedCluster],
    cfg: MiningConfig,
) -> list[CulturePoint]:
    """Materialize the dominant-language members of each selected cluster, central first."""
    doc_by_id: dict[str, Document] = {d.id: d for d in dset.docs}
    out: list[CulturePoint] = []
    for sel in selected:
        members = assignment.members(sel.cluster_id)
        modal = [i for i in members if candidates.entries[i].lang == sel.lang]
        ids = [candidates.entries[i].id for i in modal]
        rows = candidates.matrix.rows[modal]
        ordered = rank_central(ids, rows, assignment.centroids[sel.cluster_id], n=len(ids))
        for rank, doc_id in enumerate(ordered, start=1):
            doc = doc_by_id.get(doc_id)
            if doc is None:
                raise StageError("extract", f"candidate {doc_id!r} missing from corpus")
            out.append(
                CulturePoint(
                    id=doc.id,
                    title=doc.title,
                    leading_paragraph=doc.paragraphs[0] if doc.paragraphs else "",
                    lang=sel.lang,
                    cluster_id=sel.cluster_id,
                    gamma=sel.gamma,
                    cluster_size=sel.size,
                    centrality_rank=rank,
                )
            )
    return out


def write_culture_points(cps: Sequence[CulturePoint], path: str | Path) -> None:
    """Persist culture points as JSONL with a stable field order, atomically."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for cp in cps:
            rec = {
                "id": cp.id,
                "title": cp.title,
                "leading_paragraph": cp.leading_paragraph,
                "lang": cp.lang,
                "cluster_id": cp.cluster_id,
                "gamma": cp.gamma,
                "cluster_size": cp.cluster_size,
                "centrality_rank": cp.centrality_rank,
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    tmp.replace(path)


def read_culture_points(path: str | Path) -> list[CulturePoint]:
    cps: list[CulturePoint] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        cps.append(CulturePoint(**rec))
    return cps


def write_candidates(candidates: CandidateSet, path: str | Path) -> None:
    """Persist Stage-1 survivors (metrics only; vectors live in their own file)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for c in candidates.entries:
            rec = {"id": c.id, "lang": c.lang, "delta": c.delta, "entropy": c.entropy}
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    tmp.replace(path)


def read_candidates(
    path: str | Path, matrix: EmbeddingMatrix, cfg: MiningConfig
) -> CandidateSet:
    """Rebuild a CandidateSet from its JSONL plus the matching vector file."""
    entries: list[Candidate] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        entries.append(Candidate(rec["id"], rec["lang"], rec["delta"], rec["entropy"]))
    per_language: dict[str, int] = {}
    for c in entries:
        per_language[c.lang] = per_language.get(c.lang, 0) + 1
    return CandidateSet(
        entries=tuple(entries),
        matrix=matrix,
        config=cfg,
        per_language=per_language,
    )
