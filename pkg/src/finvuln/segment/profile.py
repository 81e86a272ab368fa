"""Cluster profiling: per-cluster means of every column, including the
labels and demographics held out of clustering."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np


@dataclass
class ClusterProfile:
    clusters: List[int]
    sizes: List[int]
    shares: List[float]
    columns: List[str]
    means: np.ndarray  # (n_clusters, n_columns), NaN when a column is empty
    min_cluster: List[Optional[int]]  # per column
    max_cluster: List[Optional[int]]

    def rows(self) -> List[dict]:
        out = []
        for j, col in enumerate(self.columns):
            for ci, c in enumerate(self.clusters):
                v = self.means[ci, j]
                out.append(
                    {
                        "column": col,
                        "cluster": c,
                        "mean": None if math.isnan(v) else float(v),
                        "is_min": self.min_cluster[j] == c,
                        "is_max": self.max_cluster[j] == c,
                    }
                )
        return out


def profile_clusters(
    assignment: np.ndarray,
    columns: Dict[str, np.ndarray],
) -> ClusterProfile:
    """Mean of every supplied column per cluster (NaN-aware), with
    min/max cluster flags per column for heatmap rendering.

    ``columns`` maps column name -> value array aligned with
    ``assignment``; pass features, indicator rates and protected rates
    together to profile held-out columns alongside clustering inputs.
    """
    assignment = np.asarray(assignment)
    clusters = [int(c) for c in np.unique(assignment)]
    names = list(columns)
    n_clusters = len(clusters)
    means = np.full((n_clusters, len(names)), np.nan)
    sizes = []
    for ci, c in enumerate(clusters):
        mask = assignment == c
        size = int(mask.sum())
        if size == 0:
            raise ValueError(f"cluster {c} is empty")
        sizes.append(size)
        for j, name in enumerate(names):
            vals = np.asarray(columns[name], dtype=np.float64)[mask]
            present = ~np.isnan(vals)
            if present.any():
                means[ci, j] = float(vals[present].mean())
    total = float(sum(sizes))
    shares = [s / total for s in sizes]
    min_cluster: List[Optional[int]] = []
    max_cluster: List[Optional[int]] = []
    for j in range(len(names)):
        col = means[:, j]
        if np.isnan(col).all():
            min_cluster.append(None)
            max_cluster.append(None)
        else:
            min_cluster.append(clusters[int(np.nanargmin(col))])
            max_cluster.append(clusters[int(np.nanargmax(col))])
    return ClusterProfile(
        clusters=clusters,
        sizes=sizes,
        shares=shares,
        columns=names,
        means=means,
        min_cluster=min_cluster,
        max_cluster=max_cluster,
    )


def radar_export(
    profile: ClusterProfile, cluster_a: int, cluster_b: int, columns: Sequence[str]
) -> List[dict]:
    """Two clusters on a shared 0-1 scale per column (min-max over all
    clusters), ready for radar-chart plotting."""
    ia = profile.clusters.index(cluster_a)
    ib = profile.clusters.index(cluster_b)
    out = []
    for col in columns:
        j = profile.columns.index(col)
        vals = profile.means[:, j]
        lo = float(np.nanmin(vals))
        hi = float(np.nanmax(vals))
        span = hi - lo
        for label, idx in ((cluster_a, ia), (cluster_b, ib)):
            v = profile.means[idx, j]
            scaled = 0.5 if span == 0 else (float(v) - lo) / span
            out.append({"column": col, "cluster": label, "scaled": scaled, "value": float(v)})
    return out
