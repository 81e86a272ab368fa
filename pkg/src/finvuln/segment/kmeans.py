"""Lloyd k-means with k-means++ seeding, silhouette diagnostics and
partition-comparison utilities."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .. import kernels
from ..seeding import generator

MAX_ITER = 300
RESTARTS = 10
WEAK_SILHOUETTE = 0.3


@dataclass
class KMeansResult:
    k: int
    centroids: np.ndarray
    assignment: np.ndarray
    inertia: float
    n_iter: int
    inertia_trace: List[float] = field(default_factory=list)  # per Lloyd iteration, winning restart


def _plus_plus_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    first = int(rng.integers(n))
    centers[0] = X[first]
    d2 = kernels.pairwise_sq_dists(X, centers[0:1])[:, 0]
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), r))
            idx = min(idx, n - 1)
        centers[j] = X[idx]
        d2 = np.minimum(d2, kernels.pairwise_sq_dists(X, centers[j : j + 1])[:, 0])
    return centers


def _lloyd(X: np.ndarray, centers: np.ndarray, max_iter: int) -> Tuple[np.ndarray, np.ndarray, float, int, List[float]]:
    k = centers.shape[0]
    assignment = np.full(X.shape[0], -1, dtype=np.int64)
    trace: List[float] = []
    for iteration in range(1, max_iter + 1):
        d2 = kernels.pairwise_sq_dists(X, centers)
        new_assign = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(len(new_assign)), new_assign].sum())
        trace.append(inertia)
        if np.array_equal(new_assign, assignment):
            return centers, assignment, inertia, iteration, trace
        assignment = new_assign
        for j in range(k):
            members = X[assignment == j]
            if len(members):
                centers[j] = members.mean(axis=0)
        # empty clusters keep their previous centroid
    d2 = kernels.pairwise_sq_dists(X, centers)
    assignment = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(len(assignment)), assignment].sum())
    trace.append(inertia)
    return centers, assignment, inertia, max_iter, trace


def kmeans(
    X: np.ndarray,
    k: int,
    seed: int = 0,
    restarts: int = RESTARTS,
    max_iter: int = MAX_ITER,
) -> KMeansResult:
    """Best of ``restarts`` k-means++ runs by final inertia."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if k < 2:
        raise ValueError("k must be >= 2")
    n_distinct = len(np.unique(X, axis=0))
    if k > n_distinct:
        raise ValueError(f"k={k} exceeds {n_distinct} distinct points")
    best: Optional[KMeansResult] = None
    for r in range(restarts):
        rng = generator(seed, "kmeans", str(k), str(r))
        centers = _plus_plus_init(X, k, rng)
        centers, assignment, inertia, n_iter, trace = _lloyd(X, centers.copy(), max_iter)
        if best is None or inertia < best.inertia:
            best = KMeansResult(k, centers.copy(), assignment.copy(), inertia, n_iter, trace)
    return best


def silhouette_values(X: np.ndarray, assignment: np.ndarray) -> np.ndarray:
    """Per-point silhouette in [-1, 1]; singleton clusters score 0."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    clusters = np.unique(assignment)
    d = np.sqrt(kernels.pairwise_sq_dists(X, X))
    sizes = {c: int((assignment == c).sum()) for c in clusters}
    s = np.zeros(n)
    mean_to = np.empty((n, len(clusters)))
    for ci, c in enumerate(clusters):
        mean_to[:, ci] = d[:, assignment == c].mean(axis=1)
    for i in range(n):
        ci = int(np.flatnonzero(clusters == assignment[i])[0])
        size = sizes[assignment[i]]
        if size == 1:
            s[i] = 0.0
            continue
        a = mean_to[i, ci] * size / (size - 1)  # exclude the point itself
        b = np.inf
        for cj in range(len(clusters)):
            if cj != ci:
                b = min(b, mean_to[i, cj])
        denom = max(a, b)
        s[i] = 0.0 if denom == 0 else (b - a) / denom
    return s


def silhouette_mean(X: np.ndarray, assignment: np.ndarray) -> float:
    return float(silhouette_values(X, assignment).mean())


@dataclass
class KSelection:
    table: List[Dict[str, float]]  # k, inertia, silhouette
    recommended_k: int
    weak_structure: bool  # no k reached a solid silhouette


def select_k(
    X: np.ndarray, k_range: Sequence[int] = range(2, 9), seed: int = 0
) -> Tuple[KSelection, Dict[int, KMeansResult]]:
    """Inertia (elbow curve, for human inspection) and mean silhouette
    per k; the recommendation is the silhouette maximizer."""
    results: Dict[int, KMeansResult] = {}
    table = []
    for k in k_range:
        res = kmeans(X, k, seed=seed)
        results[k] = res
        table.append(
            {"k": k, "inertia": res.inertia, "silhouette": silhouette_mean(X, res.assignment)}
        )
    best = max(table, key=lambda row: row["silhouette"])
    return (
        KSelection(
            table=table,
            recommended_k=int(best["k"]),
            weak_structure=bool(best["silhouette"] < WEAK_SILHOUETTE),
        ),
        results,
    )


# ---------------------------------------------------------------------------
# Partition comparison


def partitions_equal(a: np.ndarray, b: np.ndarray) -> bool:
    """True when two labelings induce the same partition (up to renaming)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if len(a) != len(b):
        return False
    mapping: Dict[int, int] = {}
    reverse: Dict[int, int] = {}
    for x, y in zip(a.tolist(), b.tolist()):
        if mapping.setdefault(x, y) != y:
            return False
        if reverse.setdefault(y, x) != x:
            return False
    return True


def adjusted_rand_index(a: np.ndarray, b: np.ndarray) -> float:
    """Chance-corrected pair-counting agreement between two partitions."""
    a = np.asarray(a)
    b = np.asarray(b)
    if len(a) != len(b):
        raise ValueError("partitions must have equal length")
    n = len(a)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_cells = comb2(table.astype(np.float64)).sum()
    sum_rows = comb2(table.sum(axis=1).astype(np.float64)).sum()
    sum_cols = comb2(table.sum(axis=0).astype(np.float64)).sum()
    total = comb2(float(n))
    expected = sum_rows * sum_cols / total if total else 0.0
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))
