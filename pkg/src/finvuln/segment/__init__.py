"""Standardize, reduce, cluster and profile account feature vectors."""

from .pca import PcaModel, fit_pca
from .kmeans import (
    KMeansResult,
    KSelection,
    adjusted_rand_index,
    kmeans,
    partitions_equal,
    select_k,
    silhouette_mean,
    silhouette_values,
)
from .tsne import feasible_perplexity, tsne_embed
from .profile import ClusterProfile, profile_clusters, radar_export

__all__ = [
    "PcaModel",
    "fit_pca",
    "KMeansResult",
    "KSelection",
    "adjusted_rand_index",
    "kmeans",
    "partitions_equal",
    "select_k",
    "silhouette_mean",
    "silhouette_values",
    "feasible_perplexity",
    "tsne_embed",
    "ClusterProfile",
    "profile_clusters",
    "radar_export",
]
