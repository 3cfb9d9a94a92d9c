import csv

import numpy as np
import pytest

from cmine.analysis import (
    MixingReport,
    TranslationPair,
    alignment_report,
    alignment_resistance,
    cp_distribution,
    mixing_report,
    mixing_score,
    read_pairs,
    stratified_group_sample,
    write_distribution_csv,
    write_pairs,
    write_projection_csv,
    write_radar_csv,
)
from cmine.mining import CulturePoint
from cmine.vectors import EmbeddingMatrix


def _matrix(rows, langs) -> EmbeddingMatrix:
    rows = np.asarray(rows, dtype=np.float32)
    return EmbeddingMatrix(
        ids=tuple(f"r{i}" for i in range(len(rows))), langs=tuple(langs), rows=rows
    )


def _cp(doc_id: str, lang: str) -> CulturePoint:
    return CulturePoint(
        id=doc_id, title=doc_id, leading_paragraph="", lang=lang,
        cluster_id=0, gamma=1.0, cluster_size=5, centrality_rank=1,
    )


# ---------------------------------------------------------------- alignment


def test_alignment_identity_pairs_zero() -> None:
    v = np.array([1.0, 2.0, 3.0])
    pairs = [TranslationPair("a", "de", v, v)]
    out = alignment_resistance(pairs, metric="cosine")
    assert out == {"de": pytest.approx(0.0, abs=1e-7)}


def test_alignment_orthogonal_pairs() -> None:
    pairs = [
        TranslationPair("a", "ja", np.array([1.0, 0.0]), np.array([0.0, 1.0])),
        TranslationPair("b", "ja", np.array([0.0, 1.0]), np.array([1.0, 0.0])),
    ]
    out = alignment_resistance(pairs, metric="cosine")
    assert out["ja"] == pytest.approx(1.0, abs=1e-7)


def test_alignment_euclidean_mean_per_language() -> None:
    pairs = [
        TranslationPair("a", "de", np.array([0.0]), np.array([3.0])),
        TranslationPair("b", "de", np.array([0.0]), np.array([1.0])),
        TranslationPair("c", "fr", np.array([0.0]), np.array([5.0])),
    ]
    out = alignment_resistance(pairs, metric="euclidean")
    assert out == {"de": pytest.approx(2.0), "fr": pytest.approx(5.0)}
    assert list(out) == ["de", "fr"]


def test_alignment_report_delta() -> None:
    v0 = np.array([1.0, 0.0])
    cp = [TranslationPair("a", "de", v0, np.array([0.0, 1.0]))]
    base = [TranslationPair("b", "de", v0, v0), TranslationPair("c", "zh", v0, v0)]
    rep = alignment_report(cp, base)
    assert rep["de"]["delta"] == pytest.approx(1.0, abs=1e-7)
    assert "cp" not in rep["zh"]


def test_pair_shape_mismatch_rejected() -> None:
    with pytest.raises(ValueError):
        TranslationPair("a", "de", np.zeros(3), np.zeros(4))


def test_pairs_roundtrip(tmp_path) -> None:
    pairs = [
        TranslationPair("a", "de", np.array([1.0, 2.0]), np.array([3.0, 4.0])),
        TranslationPair("b", "ja", np.array([0.5, 0.5]), np.array([0.25, 0.75])),
    ]
    path = tmp_path / "pairs.jsonl"
    write_pairs(pairs, path)
    back = read_pairs(path)
    assert [p.id for p in back] == ["a", "b"]
    np.testing.assert_allclose(back[0].original, [1.0, 2.0])
    np.testing.assert_allclose(back[1].translated, [0.25, 0.75])


# ---------------------------------------------------------------- mixing


def test_mixing_separated_languages_pure() -> None:
    rng = np.random.default_rng(0)
    a = rng.normal((0.0, 0.0), 0.05, size=(20, 2))
    b = rng.normal((10.0, 0.0), 0.05, size=(20, 2))
    m = _matrix(np.concatenate([a, b]), ["de"] * 20 + ["ja"] * 20)
    assert mixing_score(m, k_nn=5).mean() == pytest.approx(1.0)


def test_mixing_interleaved_languages_near_half() -> None:
    rng = np.random.default_rng(1)
    rows = rng.normal(size=(400, 2))
    langs = ["de" if i % 2 == 0 else "ja" for i in range(400)]
    m = _matrix(rows, langs)
    # both languages draw from one distribution, so neighborhoods are mixed
    assert mixing_score(m, k_nn=10).mean() == pytest.approx(0.5, abs=0.05)


def test_mixing_single_language_is_one() -> None:
    rng = np.random.default_rng(2)
    m = _matrix(rng.normal(size=(15, 3)), ["fr"] * 15)
    np.testing.assert_allclose(mixing_score(m, k_nn=4), 1.0)


def test_mixing_report_groups() -> None:
    rng = np.random.default_rng(3)
    a = rng.normal((0.0, 0.0), 0.05, size=(10, 2))
    b = rng.normal((10.0, 0.0), 0.05, size=(10, 2))
    mixed = rng.normal((20.0, 0.0), 0.05, size=(20, 2))
    rows = np.concatenate([a, b, mixed])
    langs = ["de"] * 10 + ["ja"] * 10 + ["de", "ja"] * 10
    groups = ["cp"] * 20 + ["non_cp"] * 20
    rep = mixing_report(_matrix(rows, langs), groups, k_nn=5)
    assert isinstance(rep, MixingReport)
    assert rep.group_purity["cp"] == pytest.approx(1.0)
    assert rep.group_purity["non_cp"] == pytest.approx(0.5, abs=0.12)
    assert rep.sample_sizes["cp"] == {"de": 10, "ja": 10}


def test_mixing_report_requires_aligned_groups() -> None:
    m = _matrix(np.zeros((3, 2)), ["de"] * 3)
    with pytest.raises(ValueError):
        mixing_report(m, ["cp"] * 2)


# ---------------------------------------------------------------- sampling


def test_stratified_group_sample_caps_and_order() -> None:
    rng = np.random.default_rng(4)
    rows = rng.normal(size=(100, 2))
    langs = ["de"] * 50 + ["ja"] * 50
    groups = ["cp" if i % 5 == 0 else "non_cp" for i in range(100)]
    sub, sub_groups = stratified_group_sample(_matrix(rows, langs), groups, per_lang=8, seed=0)
    counts: dict[tuple[str, str], int] = {}
    for lang, group in zip(sub.langs, sub_groups):
        counts[(group, lang)] = counts.get((group, lang), 0) + 1
    assert all(v <= 8 for v in counts.values())
    # cells smaller than the cap are kept whole
    assert counts[("cp", "de")] == 8
    # original row order is preserved
    positions = [int(i[1:]) for i in sub.ids]
    assert positions == sorted(positions)


def test_stratified_group_sample_deterministic() -> None:
    rng = np.random.default_rng(5)
    rows = rng.normal(size=(60, 2))
    langs = ["de"] * 30 + ["ja"] * 30
    groups = ["cp"] * 30 + ["non_cp"] * 30
    m = _matrix(rows, langs)
    a, ag = stratified_group_sample(m, groups, per_lang=10, seed=3)
    b, bg = stratified_group_sample(m, groups, per_lang=10, seed=3)
    assert a.ids == b.ids and ag == bg
    c, _ = stratified_group_sample(m, groups, per_lang=10, seed=4)
    assert c.ids != a.ids


# ---------------------------------------------------------------- distribution and CSV


def test_cp_distribution_counts_and_yield() -> None:
    cps = [_cp("a", "de"), _cp("b", "de"), _cp("c", "ja")]
    rows = cp_distribution(cps, {"de": 10, "ja": 4, "zh": 7})
    assert rows == [
        {"lang": "de", "cp_count": 2, "sampled": 10, "yield": 0.2},
        {"lang": "ja", "cp_count": 1, "sampled": 4, "yield": 0.25},
        {"lang": "zh", "cp_count": 0, "sampled": 7, "yield": 0.0},
    ]


def test_cp_distribution_zero_denominator() -> None:
    rows = cp_distribution([_cp("a", "de")], {})
    assert rows == [{"lang": "de", "cp_count": 1, "sampled": 0, "yield": 0.0}]


def _read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_write_radar_csv(tmp_path) -> None:
    report = {
        "de": {"cp": 0.5, "baseline": 0.1, "delta": 0.4},
        "ja": {"cp": 0.7, "baseline": 0.2, "delta": 0.5},
    }
    path = tmp_path / "radar.csv"
    write_radar_csv(report, path)
    rows = _read_csv(path)
    assert rows[0] == {"lang": "de", "group": "cp", "mean_distance": "0.5"}
    assert {(r["lang"], r["group"]) for r in rows} == {
        ("de", "cp"), ("de", "baseline"), ("ja", "cp"), ("ja", "baseline"),
    }


def test_write_projection_csv(tmp_path) -> None:
    rng = np.random.default_rng(6)
    m = _matrix(rng.normal(size=(12, 5)), ["de"] * 6 + ["ja"] * 6)
    groups = ["cp", "non_cp"] * 6
    path = tmp_path / "proj.csv"
    write_projection_csv(m, groups, path)
    rows = _read_csv(path)
    assert len(rows) == 12
    assert set(rows[0]) == {"id", "lang", "group", "x", "y"}
    assert {r["group"] for r in rows} == {"cp", "non_cp"}
    float(rows[0]["x"]); float(rows[0]["y"])


def test_write_distribution_csv(tmp_path) -> None:
    rows_in = cp_distribution([_cp("a", "de")], {"de": 4})
    path = tmp_path / "dist.csv"
    write_distribution_csv(rows_in, path)
    rows = _read_csv(path)
    assert rows == [{"lang": "de", "cp_count": "1", "sampled": "4", "yield": "0.25"}]
