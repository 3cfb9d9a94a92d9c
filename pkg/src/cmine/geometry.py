"""Numerical kernels: K-Means, k-NN local dispersion, similarity-entropy coherence, 2-D PCA.

All kernels are pure functions of their inputs and single-threaded, so results
are reproducible bit-for-bit given the same seed on the same platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

_PCA_START_SEED = 0x2D5EED  # fixed internal seed; pca_project takes no seed argument


@dataclass
class ClusterAssignment:
    """Result of a K-Means run over an embedding matrix."""

    k: int
    assign: np.ndarray  # (n,) int64, values in [0, k)
    centroids: np.ndarray  # (k, dim) float32
    inertia: float
    seed: int
    n_iter: int = 0
    inertia_history: list[float] = field(default_factory=list)

    def members(self, cluster_id: int) -> np.ndarray:
        return np.flatnonzero(self.assign == cluster_id)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assign, minlength=self.k)


def _pairwise_sq_dists(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between the rows of x and y, clipped at 0."""
    x2 = np.einsum("ij,ij->i", x, x)[:, None]
    y2 = np.einsum("ij,ij->i", y, y)[None, :]
    d2 = x2 + y2 - 2.0 * (x @ y.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _kmeans_pp_seed(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy k-means++ seeding: several candidates per step, keep the best potential."""
    n = x.shape[0]
    n_trials = 2 + int(np.log(k)) if k > 1 else 1
    centers = np.empty((k, x.shape[1]), dtype=np.float64)
    centers[0] = x[rng.integers(n)]
    closest = _pairwise_sq_dists(x, centers[0:1])[:, 0]
    for c in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # all points already coincide with a center; any choice is equivalent
            candidates = rng.integers(n, size=n_trials)
        else:
            candidates = rng.choice(n, size=n_trials, p=closest / total)
        best_idx, best_pot, best_closest = -1, np.inf, None
        for cand in candidates:
            cand_closest = np.minimum(closest, _pairwise_sq_dists(x, x[cand : cand + 1])[:, 0])
            pot = cand_closest.sum()
            if pot < best_pot:
                best_idx, best_pot, best_closest = int(cand), pot, cand_closest
        centers[c] = x[best_idx]
        closest = best_closest
    return centers


def kmeans(
    rows: np.ndarray,
    k: int,
    seed: int,
    max_iter: int = 100,
    tol: float = 1e-4,
) -> ClusterAssignment:
    """Lloyd's K-Means with k-means++ seeding, deterministic given ``seed``.

    Stops when the relative inertia change drops below ``tol`` or after
    ``max_iter`` iterations. Clusters that empty out are re-seeded to the
    point farthest from the empty cluster's previous centroid; the recorded
    per-iteration inertia is non-increasing throughout.
    """
    x = np.asarray(rows, dtype=np.float64)
    n = x.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < k:
        raise ValueError(f"k={k} exceeds row count {n}")

    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_seed(x, k, rng)
    assign = np.zeros(n, dtype=np.int64)
    history: list[float] = []
    prev_inertia = np.inf
    n_iter = 0

    for n_iter in range(1, max_iter + 1):
        d2 = _pairwise_sq_dists(x, centroids)
        assign = np.argmin(d2, axis=1)

        for c in range(k):
            mask = assign == c
            if mask.any():
                centroids[c] = x[mask].mean(axis=0)
            else:
                # steal the point farthest from this cluster's stale centroid
                far = int(np.argmax(_pairwise_sq_dists(x, centroids[c : c + 1])[:, 0]))
                centroids[c] = x[far]
                assign[far] = c

        diffs = x - centroids[assign]
        inertia = float(np.einsum("ij,ij->", diffs, diffs))
        history.append(inertia)
        if prev_inertia - inertia <= tol * prev_inertia:
            break
        prev_inertia = inertia

    # final tidy pass so each centroid is exactly the mean of its members
    for c in range(k):
        mask = assign == c
        if mask.any():
            centroids[c] = x[mask].mean(axis=0)
    diffs = x - centroids[assign]
    inertia = float(np.einsum("ij,ij->", diffs, diffs))

    return ClusterAssignment(
        k=k,
        assign=assign,
        centroids=centroids.astype(np.float32),
        inertia=inertia,
        seed=seed,
        n_iter=n_iter,
        inertia_history=history,
    )


def knn_indices(rows: np.ndarray, k_nn: int) -> np.ndarray:
    """(n, k_nn) indices of each row's nearest neighbors, self excluded, ties to the lower row index."""
    x = np.asarray(rows, dtype=np.float64)
    n = x.shape[0]
    if n <= k_nn:
        raise ValueError(f"need more than k_nn={k_nn} rows, got {n}")
    d2 = _pairwise_sq_dists(x, x)
    np.fill_diagonal(d2, np.inf)
    # lexsort: primary key distance, secondary key row index for deterministic ties
    order = np.lexsort((np.broadcast_to(np.arange(n), (n, n)), d2), axis=1)
    return order[:, :k_nn]


def local_dispersion(rows: np.ndarray, k_nn: int = 5) -> np.ndarray:
    """Mean Euclidean distance from each row to its ``k_nn`` nearest neighbors."""
    x = np.asarray(rows, dtype=np.float64)
    neighbors = knn_indices(x, k_nn)
    diffs = x[:, None, :] - x[neighbors]
    dists = np.sqrt(np.einsum("ijk,ijk->ij", diffs, diffs))
    return dists.mean(axis=1)


def coherence_entropy(unit_vectors: np.ndarray) -> float:
    """Mean entropy of the row-normalized unit-similarity matrix.

    Pairwise cosine similarities (diagonal pinned at 1, negatives clamped to
    0) are normalized per row into a distribution whose Shannon entropy, in
    nats, is averaged over units. A single unit scores 0; n identical units
    score ln(n); mutually orthogonal units score 0.
    """
    units = np.asarray(unit_vectors, dtype=np.float64)
    if units.ndim != 2 or units.shape[0] < 1:
        raise ValueError(f"expected (n, d) unit vectors with n >= 1, got shape {units.shape}")
    n = units.shape[0]
    norms = np.sqrt(np.einsum("ij,ij->i", units, units))
    if np.any(norms == 0.0):
        raise DomainError("coherence entropy is undefined for zero unit vectors")
    if n == 1:
        return 0.0
    normed = units / norms[:, None]
    sim = normed @ normed.T
    np.fill_diagonal(sim, 1.0)
    np.maximum(sim, 0.0, out=sim)
    p = sim / sim.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0.0, p * np.log(p), 0.0)
    return float(-terms.sum(axis=1).mean())


def pca_project(rows: np.ndarray, dims: int = 2, tol: float = 1e-8, max_iter: int = 10_000) -> np.ndarray:
    """Project rows onto the top principal components via power iteration with deflation.

    Components use the sign convention that the largest-magnitude loading is
    positive. Zero-variance input projects to all-zero coordinates.
    """
    x = np.asarray(rows, dtype=np.float64)
    n, d = x.shape
    if n < 2:
        raise ValueError("need at least 2 rows")
    if dims < 1 or dims > min(n, d):
        raise ValueError(f"dims={dims} out of range for a {n}x{d} matrix")

    centered = x - x.mean(axis=0)
    cov = (centered.T @ centered) / (n - 1)
    rng = np.random.default_rng(_PCA_START_SEED)

    components = np.zeros((dims, d), dtype=np.float64)
    trace_floor = 1e-12 * max(1.0, float(np.trace(cov)))
    for comp in range(dims):
        if float(np.trace(cov)) <= trace_floor:
            break  # remaining variance is numerically zero; leave zero components
        v = rng.standard_normal(d)
        # keep iterates orthogonal to the components already found
        for prev in components[:comp]:
            v -= np.dot(v, prev) * prev
        v /= max(np.linalg.norm(v), 1e-300)
        for _ in range(max_iter):
            w = cov @ v
            for prev in components[:comp]:
                w -= np.dot(w, prev) * prev
            norm = np.linalg.norm(w)
            if norm <= trace_floor:
                w = np.zeros(d)
                break
            w /= norm
            if min(np.linalg.norm(w - v), np.linalg.norm(w + v)) < tol:
                v = w
                break
            v = w
        if not np.any(w):
            break
        lead = int(np.argmax(np.abs(v)))
        if v[lead] < 0:
            v = -v
        components[comp] = v
        eigval = float(v @ cov @ v)
        cov = cov - eigval * np.outer(v, v)

    return centered @ components.T
