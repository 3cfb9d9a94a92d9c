"""Synthetic embedding fixtures with planted universal and language-exclusive clusters.

Universal concepts share one center across every language; island concepts get
a center exclusive to a single language. Ground-truth labels ride along so
pipeline output can be scored against what was planted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .seeds import derive_seed
from .vectors import EmbeddingMatrix

_MAX_CENTER_TRIES = 1000


@dataclass(frozen=True)
class SyntheticSpec:
    languages: tuple[str, ...]
    n_universal: int
    n_islands_per_lang: int
    entries_per_lang: int
    dim: int
    sigma_in: float
    delta: float
    contaminate_islands: bool = False

    def __post_init__(self) -> None:
        if not self.languages:
            raise DomainError("at least one language required")
        if len(set(self.languages)) != len(self.languages):
            raise DomainError("duplicate language codes")
        if self.n_universal < 0 or self.n_islands_per_lang < 0:
            raise DomainError("concept counts must be non-negative")
        per_lang = self.n_universal + self.n_islands_per_lang
        if per_lang < 1:
            raise DomainError("need at least one concept per language")
        if self.entries_per_lang < per_lang:
            raise DomainError(
                f"entries_per_lang={self.entries_per_lang} cannot cover {per_lang} concepts"
            )
        if self.dim < 1:
            raise DomainError("dim must be positive")
        if self.sigma_in < 0:
            raise DomainError("sigma_in must be non-negative")
        if self.delta <= 4.0 * self.sigma_in:
            raise DomainError(
                f"non-separable spec: delta={self.delta} must exceed 4*sigma_in={4.0 * self.sigma_in}"
            )


@dataclass(frozen=True)
class SyntheticLabels:
    """Per-row ground truth aligned with the generated matrix."""

    kinds: tuple[str, ...]  # "universal" or "island"
    concepts: tuple[str, ...]  # concept key, e.g. "u007" or "fr-i03"
    centers: dict[str, np.ndarray] = field(repr=False)

    def rows_for_concept(self, key: str) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.concepts) == key)

    def island_keys(self) -> tuple[str, ...]:
        seen: list[str] = []
        for kind, key in zip(self.kinds, self.concepts):
            if kind == "island" and key not in seen:
                seen.append(key)
        return tuple(seen)


def _sample_centers(count: int, dim: int, delta: float, rng: np.random.Generator) -> np.ndarray:
    """Rejection-sample centers so every pair is at least delta apart."""
    centers = np.empty((count, dim), dtype=np.float64)
    placed = 0
    for _ in range(_MAX_CENTER_TRIES * max(count, 1)):
        if placed == count:
            break
        cand = rng.standard_normal(dim)
        if placed == 0:
            centers[placed] = cand
            placed += 1
            continue
        gaps = centers[:placed] - cand
        if np.sqrt(np.einsum("ij,ij->i", gaps, gaps)).min() >= delta:
            centers[placed] = cand
            placed += 1
    if placed < count:
        raise DomainError(
            f"could not place {count} centers at separation {delta} in {dim} dimensions"
        )
    return centers


def gen_synthetic(spec: SyntheticSpec, seed: int) -> tuple[EmbeddingMatrix, SyntheticLabels]:
    """Generate a labeled planted-cluster embedding matrix, deterministic given seed.

    Each language draws entries around every universal center plus its own
    island centers; entry counts are split as evenly as allocation allows.
    With contaminate_islands set, every island also receives one extra entry
    labeled with the next language in the list.
    """
    n_centers = spec.n_universal + spec.n_islands_per_lang * len(spec.languages)
    rng_centers = np.random.default_rng(derive_seed(seed, "centers"))
    all_centers = _sample_centers(n_centers, spec.dim, spec.delta, rng_centers)

    universal_keys = [f"u{i:03d}" for i in range(spec.n_universal)]
    centers: dict[str, np.ndarray] = {}
    for i, key in enumerate(universal_keys):
        centers[key] = all_centers[i]
    offset = spec.n_universal
    island_keys: dict[str, list[str]] = {}
    for lang in spec.languages:
        keys = [f"{lang}-i{j:02d}" for j in range(spec.n_islands_per_lang)]
        island_keys[lang] = keys
        for key in keys:
            centers[key] = all_centers[offset]
            offset += 1

    ids: list[str] = []
    langs: list[str] = []
    kinds: list[str] = []
    concepts: list[str] = []
    rows: list[np.ndarray] = []

    for lang in spec.languages:
        rng = np.random.default_rng(derive_seed(seed, "entries", lang))
        lang_concepts = universal_keys + island_keys[lang]
        base, extra = divmod(spec.entries_per_lang, len(lang_concepts))
        for ci, key in enumerate(lang_concepts):
            count = base + (1 if ci < extra else 0)
            noise = spec.sigma_in * rng.standard_normal((count, spec.dim))
            for serial in range(count):
                ids.append(f"{lang}-{key}-{serial:04d}")
                langs.append(lang)
                kinds.append("universal" if ci < spec.n_universal else "island")
                concepts.append(key)
                rows.append(centers[key] + noise[serial])

    if spec.contaminate_islands:
        rng = np.random.default_rng(derive_seed(seed, "contaminant"))
        for li, lang in enumerate(spec.languages):
            other = spec.languages[(li + 1) % len(spec.languages)]
            for key in island_keys[lang]:
                ids.append(f"{other}-x-{key}")
                langs.append(other)
                kinds.append("island")
                concepts.append(key)
                rows.append(centers[key] + spec.sigma_in * rng.standard_normal(spec.dim))

    matrix = EmbeddingMatrix(
        ids=tuple(ids),
        langs=tuple(langs),
        rows=np.asarray(rows, dtype=np.float32),
    )
    labels = SyntheticLabels(kinds=tuple(kinds), concepts=tuple(concepts), centers=centers)
    return matrix, labels


def nearest_center_labels(m: EmbeddingMatrix, centers: dict[str, np.ndarray]) -> list[str]:
    """Assign each row to its nearest center; the recovery oracle for generated fixtures."""
    keys = list(centers)
    stack = np.stack([centers[k] for k in keys])
    x = m.rows.astype(np.float64)
    d2 = (
        np.einsum("ij,ij->i", x, x)[:, None]
        + np.einsum("ij,ij->i", stack, stack)[None, :]
        - 2.0 * (x @ stack.T)
    )
    return [keys[i] for i in np.argmin(d2, axis=1)]


def displaced_translations(
    m: EmbeddingMatrix,
    labels: SyntheticLabels,
    offset: float = 4.0,
    jitter: float = 0.01,
    seed: int = 0,
) -> np.ndarray:
    """Simulated translation vectors: island rows shifted by one fixed offset, all rows jittered.

    Universal rows end up almost exactly where they started, so their
    translation distance is a small nonzero baseline; island rows move by
    roughly ``offset`` on top of that.
    """
    rng = np.random.default_rng(derive_seed(seed, "displacement"))
    direction = rng.standard_normal(m.dim)
    direction /= np.linalg.norm(direction)
    translated = m.rows.astype(np.float64) + jitter * rng.standard_normal(m.rows.shape)
    island = np.asarray(labels.kinds) == "island"
    translated[island] += offset * direction
    return translated.astype(np.float32)
