"""Split-and-merge clustering of a non-increasing eigenvalue list.

Clusters are contiguous runs of the sorted list. For cluster ``k`` the
within-cluster spread is ``g_k = max_k / min_k`` and the gap ratio to the
next cluster is ``h_k = max_{k+1} / min_k`` (the last cluster has no gap).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Clustering:
    sizes: tuple[int, ...]
    g: tuple[float, ...]
    h: tuple[float, ...]

    @property
    def g_max(self) -> float:
        return max(self.g)

    @property
    def h_max(self) -> float:
        return max(self.h, default=0.0)

    @property
    def c_min(self) -> int:
        return min(self.sizes)

    @property
    def count(self) -> int:
        return len(self.sizes)


def _check(lambdas) -> np.ndarray:
    lam = np.asarray(lambdas, dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise ValueError("need a nonempty 1-D eigenvalue list")
    if np.any(lam <= 0):
        raise ValueError("eigenvalues must be positive")
    if np.any(np.diff(lam) > 0):
        raise ValueError("eigenvalues must be non-increasing")
    return lam


def partition_metrics(lambdas, sizes) -> Clustering:
    lam = _check(lambdas)
    if sum(sizes) != lam.size or any(c < 1 for c in sizes):
        raise ValueError(f"sizes {sizes} do not partition {lam.size} values")
    bounds = np.cumsum((0,) + tuple(sizes))
    g = tuple(float(lam[a] / lam[b - 1]) for a, b in zip(bounds[:-1], bounds[1:]))
    h = tuple(float(lam[b] / lam[b - 1]) for b in bounds[1:-1])
    return Clustering(tuple(int(c) for c in sizes), g, h)


def _best_split(lam: np.ndarray, a: int, b: int) -> int | None:
    # split point minimizing the larger of the two halves' spreads
    own = lam[a] / lam[b - 1]
    best, best_at = own, None
    for m in range(a + 1, b):
        worst = max(lam[a] / lam[m - 1], lam[m] / lam[b - 1])
        if worst < best:
            best, best_at = worst, m
    return best_at


def cluster_eigenvalues(lambdas, d1: int = 3, h_target: float = 0.1) -> Clustering:
    """Split-and-merge clustering.

    ``d1`` rounds of splitting: in each round every cluster is cut at the
    point that minimizes its larger half-spread, provided the cut lowers that
    cluster's spread. Then merge rounds: while ``h_max > h_target``, the
    adjacent pair whose union gives the smallest ``h_max`` is merged.
    """
    lam = _check(lambdas)
    if d1 < 0:
        raise ValueError("d1 must be nonnegative")
    cuts = [0, lam.size]
    for _ in range(d1):
        new_cuts = [0]
        for a, b in zip(cuts[:-1], cuts[1:]):
            m = _best_split(lam, a, b)
            if m is not None:
                new_cuts.append(m)
            new_cuts.append(b)
        if len(new_cuts) == len(cuts):
            break
        cuts = new_cuts

    def h_of(cs):
        return max((lam[c] / lam[c - 1] for c in cs[1:-1]), default=0.0)

    while len(cuts) > 2 and h_of(cuts) > h_target:
        # removing interior cut i merges the clusters on either side of it
        candidates = [cuts[:i] + cuts[i + 1:] for i in range(1, len(cuts) - 1)]
        cuts = min(candidates, key=h_of)
    return partition_metrics(lam, np.diff(cuts).tolist())
