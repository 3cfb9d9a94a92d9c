"""Independent reference implementations used to cross-check the numeric kernels.

Everything here is deliberately naive pure Python (O(n^2) loops, math module,
exact fractions) so that agreement with the vectorized kernels is evidence,
not tautology.
"""

from __future__ import annotations

import math
from fractions import Fraction


def knn_delta_oracle(rows, k_nn: int):
    """Brute-force nearest neighbors and mean-distance dispersion per row.

    Returns (neighbor index lists, delta list). Ties break toward the lower
    row index via tuple sort.
    """
    pts = [[float(v) for v in row] for row in rows]
    n = len(pts)
    neighbors: list[list[int]] = []
    deltas: list[float] = []
    for i in range(n):
        cand: list[tuple[float, int]] = []
        for j in range(n):
            if j == i:
                continue
            d = math.sqrt(sum((a - b) ** 2 for a, b in zip(pts[i], pts[j])))
            cand.append((d, j))
        cand.sort()
        chosen = cand[:k_nn]
        neighbors.append([j for _, j in chosen])
        deltas.append(sum(d for d, _ in chosen) / k_nn)
    return neighbors, deltas


def entropy_oracle(vectors) -> float:
    """Direct-formula coherence entropy: normalize, clamp, row-normalize, average."""
    pts = [[float(v) for v in row] for row in vectors]
    n = len(pts)
    if n == 1:
        return 0.0
    normed = []
    for v in pts:
        norm = math.sqrt(sum(a * a for a in v))
        normed.append([a / norm for a in v])
    total = 0.0
    for i in range(n):
        sims = []
        for j in range(n):
            if i == j:
                sims.append(1.0)
            else:
                sims.append(max(0.0, sum(a * b for a, b in zip(normed[i], normed[j]))))
        z = sum(sims)
        total += -sum((s / z) * math.log(s / z) for s in sims if s > 0.0)
    return total / n


def selection_oracle(counts: dict[str, int], tau: int, theta: str):
    """Stability-and-dominance gate with exact rational arithmetic.

    ``theta`` is a decimal string so the threshold is the exact number the
    configuration means, not its float image. Returns (modal language, share
    as Fraction) or None when the cluster is rejected.
    """
    total = sum(counts.values())
    if total == 0 or total < tau:
        return None
    top = max(counts.values())
    share = Fraction(top, total)
    if not share > Fraction(theta):
        return None
    lang = min(l for l, c in counts.items() if c == top)
    return lang, share
