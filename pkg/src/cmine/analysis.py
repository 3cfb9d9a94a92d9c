"""Geometric validation metrics over mined culture points.

Covers translation-shift distances (alignment resistance), neighbor-language
purity of embedding samples (cross-lingual mixing), and per-language CP
distribution statistics, all exported as plot-ready CSV.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .geometry import knn_indices, pca_project
from .mining import CulturePoint
from .seeds import derive_seed
from .vectors import EmbeddingMatrix, distance


@dataclass(frozen=True)
class TranslationPair:
    """A term's embedding and the embedding of its English rendering."""

    id: str
    lang: str
    original: np.ndarray
    translated: np.ndarray

    def __post_init__(self) -> None:
        orig = np.asarray(self.original, dtype=np.float32)
        trans = np.asarray(self.translated, dtype=np.float32)
        if orig.shape != trans.shape or orig.ndim != 1:
            raise ValueError(
                f"pair {self.id!r}: vector shapes differ ({orig.shape} vs {trans.shape})"
            )
        object.__setattr__(self, "original", orig)
        object.__setattr__(self, "translated", trans)


@dataclass(frozen=True)
class MixingReport:
    group_purity: dict[str, float]
    sample_sizes: dict[str, dict[str, int]]  # group -> lang -> count


def alignment_resistance(
    pairs: Iterable[TranslationPair], metric: str = "cosine"
) -> dict[str, float]:
    """Per-language mean distance between each term and its translation."""
    per_lang: dict[str, list[float]] = {}
    for p in pairs:
        per_lang.setdefault(p.lang, []).append(distance(p.original, p.translated, metric))
    return {lang: float(np.mean(vals)) for lang, vals in sorted(per_lang.items())}


def alignment_report(
    cp_pairs: Iterable[TranslationPair],
    baseline_pairs: Iterable[TranslationPair],
    metric: str = "cosine",
) -> dict[str, dict[str, float]]:
    """CP and baseline means per language plus their difference where both exist."""
    cp = alignment_resistance(cp_pairs, metric)
    base = alignment_resistance(baseline_pairs, metric)
    out: dict[str, dict[str, float]] = {}
    for lang in sorted(set(cp) | set(base)):
        entry: dict[str, float] = {}
        if lang in cp:
            entry["cp"] = cp[lang]
        if lang in base:
            entry["baseline"] = base[lang]
        if lang in cp and lang in base:
            entry["delta"] = cp[lang] - base[lang]
        out[lang] = entry
    return out


def mixing_score(m: EmbeddingMatrix, k_nn: int = 10) -> np.ndarray:
    """Per-row purity: fraction of the row's nearest neighbors sharing its language."""
    neighbors = knn_indices(m.rows.astype(np.float64), k_nn)
    langs = np.asarray(m.langs)
    return (langs[neighbors] == langs[:, None]).mean(axis=1)


def mixing_report(m: EmbeddingMatrix, groups: Sequence[str], k_nn: int = 10) -> MixingReport:
    """Mean purity per group over one combined sample, with per-language sizes."""
    if len(groups) != len(m):
        raise ValueError("one group label per row required")
    purity = mixing_score(m, k_nn)
    garr = np.asarray(groups)
    group_purity: dict[str, float] = {}
    sizes: dict[str, dict[str, int]] = {}
    for group in sorted(set(groups)):
        mask = garr == group
        group_purity[group] = float(purity[mask].mean())
        counts: dict[str, int] = {}
        for lang in np.asarray(m.langs)[mask]:
            counts[lang] = counts.get(lang, 0) + 1
        sizes[group] = dict(sorted(counts.items()))
    return MixingReport(group_purity=group_purity, sample_sizes=sizes)


def stratified_group_sample(
    m: EmbeddingMatrix, groups: Sequence[str], per_lang: int = 300, seed: int = 0
) -> tuple[EmbeddingMatrix, list[str]]:
    """Up to per_lang rows per (group, language) cell, deterministic, original row order kept."""
    if len(groups) != len(m):
        raise ValueError("one group label per row required")
    garr = np.asarray(groups)
    larr = np.asarray(m.langs)
    picked: list[int] = []
    for group in sorted(set(groups)):
        for lang in sorted(set(larr[garr == group])):
            cell = np.flatnonzero((garr == group) & (larr == lang))
            if len(cell) > per_lang:
                rng = np.random.default_rng(derive_seed(seed, "stratify", group, lang))
                cell = np.sort(rng.choice(cell, size=per_lang, replace=False))
            picked.extend(int(i) for i in cell)
    picked.sort()
    return m.subset(picked), [str(garr[i]) for i in picked]


def cp_distribution(
    cps: Sequence[CulturePoint], sampled_per_lang: Mapping[str, int]
) -> list[dict[str, object]]:
    """Per-language CP counts and yield against the sampled-entry denominators."""
    counts: dict[str, int] = {}
    for cp in cps:
        counts[cp.lang] = counts.get(cp.lang, 0) + 1
    rows: list[dict[str, object]] = []
    for lang in sorted(set(counts) | set(sampled_per_lang)):
        count = counts.get(lang, 0)
        sampled = int(sampled_per_lang.get(lang, 0))
        rows.append(
            {
                "lang": lang,
                "cp_count": count,
                "sampled": sampled,
                "yield": count / sampled if sampled else 0.0,
            }
        )
    return rows


def write_pairs(pairs: Iterable[TranslationPair], path: str | Path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for p in pairs:
            rec = {
                "id": p.id,
                "lang": p.lang,
                "original_vec": [float(x) for x in p.original],
                "translated_vec": [float(x) for x in p.translated],
            }
            fh.write(json.dumps(rec) + "\n")
    tmp.replace(path)


def read_pairs(path: str | Path) -> list[TranslationPair]:
    pairs: list[TranslationPair] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        pairs.append(
            TranslationPair(rec["id"], rec["lang"], rec["original_vec"], rec["translated_vec"])
        )
    return pairs


def _write_csv(path: Path, header: list[str], rows: Iterable[Sequence[object]]) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    tmp.replace(path)


def write_radar_csv(report: Mapping[str, Mapping[str, float]], path: str | Path) -> None:
    """lang,group,mean_distance rows from an alignment report."""
    rows = []
    for lang in sorted(report):
        for group in ("cp", "baseline"):
            if group in report[lang]:
                rows.append([lang, group, report[lang][group]])
    _write_csv(Path(path), ["lang", "group", "mean_distance"], rows)


def write_projection_csv(
    m: EmbeddingMatrix, groups: Sequence[str], path: str | Path
) -> None:
    """id,lang,group,x,y rows from a 2-D projection of the sample."""
    if len(groups) != len(m):
        raise ValueError("one group label per row required")
    coords = pca_project(m.rows.astype(np.float64), dims=2)
    rows = [
        [m.ids[i], m.langs[i], groups[i], float(coords[i, 0]), float(coords[i, 1])]
        for i in range(len(m))
    ]
    _write_csv(Path(path), ["id", "lang", "group", "x", "y"], rows)


def write_distribution_csv(rows: Sequence[Mapping[str, object]], path: str | Path) -> None:
    """lang,cp_count,sampled,yield rows from cp_distribution output."""
    _write_csv(
        Path(path),
        ["lang", "cp_count", "sampled", "yield"],
        [[r["lang"], r["cp_count"], r["sampled"], r["yield"]] for r in rows],
    )
