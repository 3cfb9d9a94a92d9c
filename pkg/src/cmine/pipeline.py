"""End-to-end orchestration: load, sample, prune, embed, two mining stages, extract.

Every stage persists its output under the run's output directory so later
stages (and theta sweeps) can resume without repeating the expensive embedding
step. report.json contains only deterministic content; wall-clock timings go
to a separate timings.json.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .analysis import (
    TranslationPair,
    alignment_report,
    cp_distribution,
    mixing_report,
    read_pairs,
    stratified_group_sample,
    write_distribution_csv,
    write_pairs,
    write_projection_csv,
    write_radar_csv,
)
from .config import RunConfig, override_theta
from .corpus import (
    DocumentSet,
    Document,
    load_corpus,
    make_sequence,
    prune_by_category,
    segment_units,
    stratified_sample,
    write_corpus,
)
from .errors import CmineError, StageError
from .mining import (
    CandidateSet,
    CulturePoint,
    extract_culture_points,
    read_candidates,
    read_culture_points,
    run_stage1,
    run_stage2,
    select_culture_clusters,
    write_candidates,
    write_culture_points,
)
from .providers import EmbedCache, HttpEmbedProvider, embed_batch, provider_from_url
from .seeds import derive_seed
from .synthesis import LLMClient, StubClient, emit_dataset, synthesize
from .synthetic import SyntheticSpec, displaced_translations, gen_synthetic
from .vectors import EmbeddingMatrix, read_vectors, write_vectors

log = logging.getLogger(__name__)

SAMPLED_FILE = "sampled.jsonl"
PRUNED_FILE = "pruned.jsonl"
SEQ_FILE = "seq.cmv"
UNITS_FILE = "units.cmv"
CANDIDATES_FILE = "candidates.jsonl"
CANDIDATE_VECTORS_FILE = "candidates.cmv"
CLUSTERS_FILE = "clusters.json"
CP_FILE = "cp.jsonl"
REPORT_FILE = "report.json"
TIMINGS_FILE = "timings.json"

FIXTURE_SPEC = SyntheticSpec(
    languages=("de", "en", "fr", "ja", "ru", "zh"),
    n_universal=50,
    n_islands_per_lang=10,
    entries_per_lang=5000,
    dim=64,
    sigma_in=0.05,
    delta=3.0,
)
# Cluster counts sized for the fixture: roughly one Stage-1 cluster per
# concept within a language and one Stage-2 cluster per distinct center,
# mirroring how the full-scale defaults relate to corpus size.
FIXTURE_K_STAGE1 = 64
FIXTURE_K_STAGE2 = 128


@dataclass
class RunReport:
    config: dict
    stages: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    per_language_sampled: dict[str, int] = field(default_factory=dict)
    per_language_candidates: dict[str, int] = field(default_factory=dict)
    per_language_cp: dict[str, int] = field(default_factory=dict)
    selected_clusters: int = 0
    cp_count: int = 0
    timings_s: dict[str, float] = field(default_factory=dict)

    def add_stage(self, name: str, in_count: int, out_count: int) -> None:
        self.stages.append({"name": name, "in": in_count, "out": out_count})

    def to_json_dict(self) -> dict:
        """Deterministic report body; timings deliberately excluded."""
        return {
            "config": self.config,
            "stages": self.stages,
            "warnings": self.warnings,
            "per_language_sampled": dict(sorted(self.per_language_sampled.items())),
            "per_language_candidates": dict(sorted(self.per_language_candidates.items())),
            "per_language_cp": dict(sorted(self.per_language_cp.items())),
            "selected_clusters": self.selected_clusters,
            "cp_count": self.cp_count,
        }


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(obj: dict, path: Path) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    tmp.replace(path)


def write_report(report: RunReport, out_dir: Path) -> None:
    _write_json(report.to_json_dict(), out_dir / REPORT_FILE)
    _write_json(
        {"stages_s": report.timings_s, "total_s": sum(report.timings_s.values())},
        out_dir / TIMINGS_FILE,
    )


def stage_sample(cfg: RunConfig) -> tuple[DocumentSet, int, list[str]]:
    """Load every per-language corpus file and apply the configured quotas."""
    docs: list[Document] = []
    warnings: list[str] = []
    for lang in sorted(cfg.corpus_files):
        dset, skipped = load_corpus(cfg.corpus_files[lang], lang)
        if skipped:
            warnings.append(f"{lang}: skipped {skipped} malformed lines")
        docs.extend(dset.docs)
    merged = DocumentSet(docs=tuple(docs), provenance="+".join(sorted(cfg.corpus_files)))
    loaded = len(merged)
    if cfg.quotas is not None:
        merged, warns = stratified_sample(merged, cfg.quotas, cfg.seed)
        warnings.extend(warns)
    out = _out_dir(cfg)
    write_corpus(merged, out / SAMPLED_FILE)
    return merged, loaded, warnings


def stage_prune(cfg: RunConfig, dset: DocumentSet | None = None) -> DocumentSet:
    if dset is None:
        dset, _ = load_corpus(Path(cfg.output_dir) / SAMPLED_FILE)
    pruned = prune_by_category(dset, frozenset(cfg.blocklist))
    write_corpus(pruned, _out_dir(cfg) / PRUNED_FILE)
    return pruned


def _embed_from_provider(
    cfg: RunConfig, dset: DocumentSet
) -> tuple[EmbeddingMatrix, EmbeddingMatrix | None]:
    provider = provider_from_url(cfg.provider_url)
    if isinstance(provider, HttpEmbedProvider):
        provider.health()
    cache = EmbedCache(cfg.cache_dir) if cfg.cache_dir else EmbedCache()

    texts = [make_sequence(d) for d in dset.docs]
    rows = embed_batch(
        provider, texts, cache=cache, expected_dim=cfg.dim, max_in_flight=cfg.workers
    )
    seq = EmbeddingMatrix(
        ids=tuple(d.id for d in dset.docs),
        langs=tuple(d.lang for d in dset.docs),
        rows=rows,
    )

    unit_ids: list[str] = []
    unit_langs: list[str] = []
    unit_texts: list[str] = []
    for doc in dset.docs:
        for i, unit in enumerate(segment_units(doc)):
            unit_ids.append(f"{doc.id}#{i}")
            unit_langs.append(doc.lang)
            unit_texts.append(unit)
    units = None
    if unit_texts:
        unit_rows = embed_batch(
            provider, unit_texts, cache=cache, expected_dim=cfg.dim, max_in_flight=cfg.workers
        )
        units = EmbeddingMatrix(ids=tuple(unit_ids), langs=tuple(unit_langs), rows=unit_rows)
    return seq, units


def _embed_from_file(
    cfg: RunConfig, dset: DocumentSet
) -> tuple[EmbeddingMatrix, EmbeddingMatrix | None]:
    stored = read_vectors(cfg.vector_file)
    missing = [d.id for d in dset.docs if d.id not in stored]
    if missing:
        raise StageError(
            "embed", f"{len(missing)} documents absent from vector file (first: {missing[0]!r})"
        )
    seq = stored.subset([stored.row_index(d.id) for d in dset.docs])
    units = read_vectors(cfg.units_file) if cfg.units_file else None
    return seq, units


def stage_embed(
    cfg: RunConfig, dset: DocumentSet | None = None
) -> tuple[EmbeddingMatrix, EmbeddingMatrix | None]:
    """Produce sequence vectors (and unit vectors when available) for the pruned corpus."""
    if dset is None:
        dset, _ = load_corpus(Path(cfg.output_dir) / PRUNED_FILE)
    if cfg.provider_url is not None:
        seq, units = _embed_from_provider(cfg, dset)
    else:
        seq, units = _embed_from_file(cfg, dset)
    out = _out_dir(cfg)
    write_vectors(seq, out / SEQ_FILE)
    if units is not None:
        write_vectors(units, out / UNITS_FILE)
    return seq, units


def units_by_document(units: EmbeddingMatrix | None) -> dict[str, np.ndarray] | None:
    """Group unit rows by their owning document (unit ids follow '<doc>#<n>')."""
    if units is None:
        return None
    grouped: dict[str, list[int]] = {}
    for i, unit_id in enumerate(units.ids):
        doc_id = unit_id.rsplit("#", 1)[0]
        grouped.setdefault(doc_id, []).append(i)
    return {doc_id: units.rows[idx] for doc_id, idx in grouped.items()}


def stage_stage1(
    cfg: RunConfig,
    dset: DocumentSet | None = None,
    seq: EmbeddingMatrix | None = None,
    units: EmbeddingMatrix | None = None,
) -> CandidateSet:
    out = Path(cfg.output_dir)
    if dset is None:
        dset, _ = load_corpus(out / PRUNED_FILE)
    if seq is None:
        seq = read_vectors(out / SEQ_FILE)
        units_path = out / UNITS_FILE
        units = read_vectors(units_path) if units_path.exists() else None
    candidates = run_stage1(
        dset, seq, cfg.mining, units=units_by_document(units), workers=cfg.workers
    )
    write_candidates(candidates, out / CANDIDATES_FILE)
    write_vectors(candidates.matrix, out / CANDIDATE_VECTORS_FILE)
    return candidates


def load_candidates(cfg: RunConfig) -> CandidateSet:
    out = Path(cfg.output_dir)
    matrix = read_vectors(out / CANDIDATE_VECTORS_FILE)
    return read_candidates(out / CANDIDATES_FILE, matrix, cfg.mining)


def stage_stage2(
    cfg: RunConfig,
    dset: DocumentSet | None = None,
    candidates: CandidateSet | None = None,
) -> tuple[list[CulturePoint], dict]:
    """Global clustering, dominance selection, and culture-point extraction."""
    out = Path(cfg.output_dir)
    if dset is None:
        dset, _ = load_corpus(out / PRUNED_FILE)
    if candidates is None:
        candidates = load_candidates(cfg)
    assignment = run_stage2(candidates, cfg.mining)
    selected = select_culture_clusters(assignment, candidates.langs(), cfg.mining)
    cps = extract_culture_points(dset, candidates, assignment, selected, cfg.mining)
    clusters = {
        "k": assignment.k,
        "seed": assignment.seed,
        "assign": [int(a) for a in assignment.assign],
        "selected": [
            {"cluster_id": s.cluster_id, "lang": s.lang, "gamma": s.gamma, "size": s.size}
            for s in selected
        ],
    }
    _write_json(clusters, out / CLUSTERS_FILE)
    write_culture_points(cps, out / CP_FILE)
    return cps, clusters


def run_pipeline(cfg: RunConfig) -> tuple[list[CulturePoint], RunReport]:
    """All stages in order; artifacts, report.json and timings.json land in output_dir.

    On failure the raised StageError carries the stage name and the partial
    report accumulated so far.
    """
    report = RunReport(config=cfg.to_dict())
    out = _out_dir(cfg)

    def run_stage(name: str, fn):
        start = time.perf_counter()
        try:
            result = fn()
        except StageError as exc:
            exc.report = report.to_json_dict()
            raise
        except CmineError as exc:
            raise StageError(name, str(exc), report=report.to_json_dict()) from exc
        report.timings_s[name] = time.perf_counter() - start
        return result

    dset, loaded, warnings = run_stage("sample", lambda: stage_sample(cfg))
    report.warnings.extend(warnings)
    report.per_language_sampled = dset.lang_counts
    report.add_stage("sample", loaded, len(dset))

    pruned = run_stage("prune", lambda: stage_prune(cfg, dset))
    report.add_stage("prune", len(dset), len(pruned))

    seq, units = run_stage("embed", lambda: stage_embed(cfg, pruned))
    unit_count = 0 if units is None else len(units)
    report.add_stage("embed", len(pruned), len(seq) + unit_count)

    candidates = run_stage("stage1", lambda: stage_stage1(cfg, pruned, seq, units))
    report.warnings.extend(candidates.warnings)
    report.per_language_candidates = dict(candidates.per_language)
    report.add_stage("stage1", len(pruned), len(candidates))

    cps, clusters = run_stage("stage2", lambda: stage_stage2(cfg, pruned, candidates))
    report.add_stage("stage2", len(candidates), len(clusters["selected"]))
    report.add_stage("extract", len(clusters["selected"]), len(cps))

    report.selected_clusters = len(clusters["selected"])
    report.cp_count = len(cps)
    for cp in cps:
        report.per_language_cp[cp.lang] = report.per_language_cp.get(cp.lang, 0) + 1

    write_report(report, out)
    return cps, report


def sweep_theta(cfg: RunConfig, thetas: Sequence[float]) -> list[dict]:
    """Re-run selection and extraction at each theta without re-embedding.

    Candidates are loaded from the output directory when present, otherwise
    computed once. The global clustering does not depend on theta, so it runs
    once and only the dominance filter varies.
    """
    if not thetas:
        raise ValueError("need at least one theta")
    out = _out_dir(cfg)
    if (out / CANDIDATES_FILE).exists() and (out / CANDIDATE_VECTORS_FILE).exists():
        dset, _ = load_corpus(out / PRUNED_FILE)
        candidates = load_candidates(cfg)
    else:
        dset, loaded, _ = stage_sample(cfg)
        dset = stage_prune(cfg, dset)
        seq, units = stage_embed(cfg, dset)
        candidates = stage_stage1(cfg, dset, seq, units)

    assignment = run_stage2(candidates, cfg.mining)
    results: list[dict] = []
    for theta in thetas:
        theta_cfg = override_theta(cfg, float(theta))
        selected = select_culture_clusters(assignment, candidates.langs(), theta_cfg.mining)
        cps = extract_culture_points(dset, candidates, assignment, selected, theta_cfg.mining)
        cp_path = out / f"cp_theta_{theta}.jsonl"
        write_culture_points(cps, cp_path)
        per_lang: dict[str, int] = {}
        for cp in cps:
            per_lang[cp.lang] = per_lang.get(cp.lang, 0) + 1
        summary = {
            "theta": float(theta),
            "selected_clusters": len(selected),
            "cp_count": len(cps),
            "per_language_cp": dict(sorted(per_lang.items())),
            "cp_file": cp_path.name,
        }
        _write_json(
            {"config": theta_cfg.to_dict(), **summary}, out / f"report_theta_{theta}.json"
        )
        results.append(summary)
    return results


ANALYSIS_TARGETS = ("radar", "projection", "distribution", "mixing")


def _sampled_counts(cfg: RunConfig) -> dict[str, int]:
    """Per-language sampled-entry counts from the run report, else the sampled corpus."""
    out = Path(cfg.output_dir)
    report_path = out / REPORT_FILE
    if report_path.exists():
        recorded = json.loads(report_path.read_text(encoding="utf-8")).get(
            "per_language_sampled"
        )
        if recorded:
            return {str(k): int(v) for k, v in recorded.items()}
    dset, _ = load_corpus(out / SAMPLED_FILE)
    return dset.lang_counts


def run_analysis(
    cfg: RunConfig, targets: Sequence[str] = ANALYSIS_TARGETS, per_lang: int = 300
) -> dict:
    """Produce the plot-ready validation exports for a finished run.

    Rows are grouped cp / non_cp by membership in the mined CP file. The
    radar export needs the configured translation-pair files and is skipped
    with a note when they are absent.
    """
    for t in targets:
        if t not in ANALYSIS_TARGETS:
            raise ValueError(f"unknown analysis target {t!r}")
    out = Path(cfg.output_dir)
    analysis_dir = out / "analysis"
    analysis_dir.mkdir(parents=True, exist_ok=True)
    cps = read_culture_points(out / CP_FILE)
    result: dict = {"written": []}

    if "radar" in targets:
        if cfg.pairs_file and cfg.baseline_pairs_file:
            report = alignment_report(
                read_pairs(cfg.pairs_file),
                read_pairs(cfg.baseline_pairs_file),
                metric=cfg.analysis_metric,
            )
            write_radar_csv(report, analysis_dir / "radar.csv")
            result["radar"] = report
            result["written"].append("analysis/radar.csv")
        else:
            result["radar"] = None
            result["notes"] = result.get("notes", []) + [
                "radar skipped: pairs_file and baseline_pairs_file not configured"
            ]

    if "projection" in targets or "mixing" in targets:
        seq = read_vectors(out / SEQ_FILE)
        cp_ids = {cp.id for cp in cps}
        groups = ["cp" if doc_id in cp_ids else "non_cp" for doc_id in seq.ids]
        sample, sample_groups = stratified_group_sample(
            seq, groups, per_lang=per_lang, seed=cfg.seed
        )
        if "projection" in targets:
            write_projection_csv(sample, sample_groups, analysis_dir / "projection.csv")
            result["written"].append("analysis/projection.csv")
        if "mixing" in targets:
            mix = mixing_report(sample, sample_groups)
            _write_json(
                {"group_purity": mix.group_purity, "sample_sizes": mix.sample_sizes},
                analysis_dir / "mixing.json",
            )
            result["mixing"] = mix.group_purity
            result["written"].append("analysis/mixing.json")

    if "distribution" in targets:
        rows = cp_distribution(cps, _sampled_counts(cfg))
        write_distribution_csv(rows, analysis_dir / "distribution.csv")
        result["distribution"] = rows
        result["written"].append("analysis/distribution.csv")
    return result


def run_synthesis(cfg: RunConfig, client: LLMClient | None = None) -> dict:
    """Build and validate instruction records for every mined cluster."""
    if client is None:
        if cfg.synth_client != "stub":
            raise StageError(
                "synth", f"unknown synth client {cfg.synth_client!r}; configure 'stub'"
            )
        client = StubClient()
    out = Path(cfg.output_dir)
    cps = read_culture_points(out / CP_FILE)
    records, rejects = synthesize(
        cps, client, n=cfg.synth_top_n, multiplicity=cfg.synth_multiplicity
    )
    emit_dataset(records, out / "synth.jsonl")
    if rejects:
        tmp = out / "synth_rejects.jsonl.tmp"
        with tmp.open("w", encoding="utf-8") as fh:
            for rej in rejects:
                fh.write(json.dumps(rej, ensure_ascii=False) + "\n")
        tmp.replace(out / "synth_rejects.jsonl")
    return {
        "records": len(records),
        "rejects": len(rejects),
        "dataset": "synth.jsonl",
        "model": client.model_id,
    }


def generate_fixture(
    out_dir: str | Path,
    seed: int = 0,
    spec: SyntheticSpec | None = None,
    contaminate: bool = False,
    k_stage1: int = FIXTURE_K_STAGE1,
    k_stage2: int = FIXTURE_K_STAGE2,
    pairs_per_lang: int = 100,
) -> dict:
    """Write a planted-cluster fixture an entire run can consume: per-language
    corpus files, the vector file, ground-truth labels, translation-pair files,
    and a ready-to-use run config.
    """
    spec = replace(spec or FIXTURE_SPEC, contaminate_islands=contaminate)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    matrix, labels = gen_synthetic(spec, seed)

    docs_by_lang: dict[str, list[Document]] = {lang: [] for lang in spec.languages}
    for i, doc_id in enumerate(matrix.ids):
        lang = matrix.langs[i]
        concept = labels.concepts[i]
        docs_by_lang[lang].append(
            Document(
                id=doc_id,
                title=doc_id,
                paragraphs=(f"Synthetic entry drawn around center {concept}.",),
                lang=lang,
            )
        )
    corpus_files: dict[str, str] = {}
    for lang in spec.languages:
        path = out / f"corpus_{lang}.jsonl"
        write_corpus(DocumentSet(docs=tuple(docs_by_lang[lang])), path)
        corpus_files[lang] = path.name

    write_vectors(matrix, out / "vectors.cmv")
    _write_json(
        {
            "seed": seed,
            "contaminated": contaminate,
            "ids": list(matrix.ids),
            "langs": list(matrix.langs),
            "kinds": list(labels.kinds),
            "concepts": list(labels.concepts),
            "centers": {k: [float(x) for x in v] for k, v in labels.centers.items()},
        },
        out / "labels.json",
    )

    translated = displaced_translations(matrix, labels, seed=seed)
    kinds = np.asarray(labels.kinds)
    langs = np.asarray(matrix.langs)
    rng = np.random.default_rng(derive_seed(seed, "pairs"))
    pair_files: dict[str, str] = {}
    for group, kind in (("cp", "island"), ("baseline", "universal")):
        pairs: list[TranslationPair] = []
        for lang in spec.languages:
            rows = np.flatnonzero((kinds == kind) & (langs == lang))
            if len(rows) > pairs_per_lang:
                rows = np.sort(rng.choice(rows, size=pairs_per_lang, replace=False))
            pairs.extend(
                TranslationPair(matrix.ids[i], lang, matrix.rows[i], translated[i])
                for i in rows
            )
        path = out / f"pairs_{group}.jsonl"
        write_pairs(pairs, path)
        pair_files[group] = path.name

    config_path = out / "run.toml"
    lines = [
        f"seed = {seed}",
        'output_dir = "run"',
        "",
        "[corpus.files]",
    ]
    lines += [f"{lang} = {json.dumps(corpus_files[lang])}" for lang in sorted(corpus_files)]
    lines += [
        "",
        "[vectors]",
        'file = "vectors.cmv"',
        "",
        "[mining]",
        f"k_stage1 = {k_stage1}",
        f"k_stage2 = {k_stage2}",
        "",
        "[analysis]",
        f"pairs_file = {json.dumps(pair_files['cp'])}",
        f"baseline_pairs_file = {json.dumps(pair_files['baseline'])}",
    ]
    config_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    return {
        "out_dir": str(out),
        "config": str(config_path),
        "rows": len(matrix),
        "languages": list(spec.languages),
        "contaminated": contaminate,
        "corpus_files": {lang: str(out / name) for lang, name in corpus_files.items()},
        "vector_file": str(out / "vectors.cmv"),
        "labels_file": str(out / "labels.json"),
        "pairs_files": {g: str(out / name) for g, name in pair_files.items()},
    }
