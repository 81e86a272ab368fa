"""Principal components via eigendecomposition of the z-scored covariance."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np


@dataclass
class PcaModel:
    mean: np.ndarray
    sd: np.ndarray
    components: np.ndarray  # (n_components, d), orthonormal rows
    explained_variance_ratio: np.ndarray  # non-increasing
    kept: np.ndarray  # bool per input column (zero-variance columns dropped)
    names: List[str]

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def _zscore(self, X: np.ndarray) -> np.ndarray:
        return (X[:, self.kept] - self.mean) / self.sd

    def transform(self, X: np.ndarray) -> np.ndarray:
        return self._zscore(X) @ self.components.T

    def inverse_transform(self, Z: np.ndarray) -> np.ndarray:
        """Back to z-score space (not raw units)."""
        return Z @ self.components

    def to_json(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "sd": self.sd.tolist(),
            "components": self.components.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
            "kept": self.kept.astype(int).tolist(),
            "names": self.names,
        }


def fit_pca(
    X: np.ndarray,
    n_components: Optional[int] = None,
    variance_target: Optional[float] = None,
    names: Optional[Sequence[str]] = None,
) -> PcaModel:
    """Fit on z-scored columns; with ``variance_target`` the component
    count is the smallest reaching that cumulative ratio."""
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n < 2:
        raise ValueError("PCA needs at least 2 rows")
    if np.isnan(X).any():
        raise ValueError("PCA input must be imputed (no NaN)")
    names = list(names) if names is not None else [f"x{j}" for j in range(d)]
    sd_all = X.std(axis=0)
    kept = sd_all > 0
    Xk = X[:, kept]
    mean = Xk.mean(axis=0)
    sd = Xk.std(axis=0)
    Z = (Xk - mean) / sd
    cov = (Z.T @ Z) / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    eigvecs = eigvecs[:, order]
    # sign convention: largest-magnitude loading positive, for reproducibility
    for j in range(eigvecs.shape[1]):
        col = eigvecs[:, j]
        pivot = np.argmax(np.abs(col))
        if col[pivot] < 0:
            eigvecs[:, j] = -col
    total = eigvals.sum()
    ratios = eigvals / total if total > 0 else eigvals
    if variance_target is not None:
        cum = np.cumsum(ratios)
        k = int(np.searchsorted(cum, variance_target - 1e-12) + 1)
        k = min(k, len(ratios))
    elif n_components is not None:
        k = min(n_components, len(ratios))
    else:
        k = len(ratios)
    return PcaModel(
        mean=mean,
        sd=sd,
        components=np.ascontiguousarray(eigvecs[:, :k].T),
        explained_variance_ratio=ratios[:k],
        kept=kept,
        names=names,
    )
