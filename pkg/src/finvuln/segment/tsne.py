"""Exact t-SNE for visualization export.

Entropy-calibrated symmetric affinities, Student-t low-dimensional
kernel, gradient descent with early exaggeration, momentum switching
and per-dimension gains.  Output feeds plots only; nothing downstream
computes on it.
"""

from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np

from .. import kernels
from ..seeding import generator

EARLY_EXAGGERATION = 12.0
EXAGGERATION_ITERS = 250
MIN_GAIN = 0.01


def feasible_perplexity(n: int) -> float:
    return (n - 1) / 3.0


def _conditional_probabilities(D: np.ndarray, perplexity: float, tol: float = 1e-5) -> np.ndarray:
    """Row-stochastic affinities whose entropy matches log(perplexity),
    by per-point bisection on the precision."""
    n = D.shape[0]
    target = math.log(perplexity)
    P = np.zeros((n, n))
    for i in range(n):
        d = np.delete(D[i], i)
        beta, beta_min, beta_max = 1.0, 0.0, math.inf
        p = np.exp(-d * beta)
        for _ in range(64):
            total = p.sum()
            if total <= 0:
                h = 0.0
            else:
                p_norm = p / total
                nz = p_norm > 0
                h = float(-(p_norm[nz] * np.log(p_norm[nz])).sum())
            diff = h - target
            if abs(diff) < tol:
                break
            if diff > 0:  # entropy too high: sharpen
                beta_min = beta
                beta = beta * 2.0 if beta_max == math.inf else 0.5 * (beta + beta_max)
            else:
                beta_max = beta
                beta = 0.5 * (beta + beta_min)
            p = np.exp(-d * beta)
        total = p.sum()
        row = p / total if total > 0 else np.full(n - 1, 1.0 / (n - 1))
        P[i, :i] = row[:i]
        P[i, i + 1 :] = row[i:]
    return P


def tsne_embed(
    X: np.ndarray,
    perplexity: float = 30.0,
    seed: int = 0,
    n_iter: int = 500,
    learning_rate: Optional[float] = None,
) -> np.ndarray:
    """2-D embedding of the rows of X; deterministic for a fixed seed."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    bound = feasible_perplexity(n)
    if perplexity >= bound:
        raise ValueError(
            f"perplexity too large: {perplexity} must be below (n-1)/3 = {bound:.2f} for n={n}"
        )
    if perplexity <= 0:
        raise ValueError("perplexity must be positive")
    D = kernels.pairwise_sq_dists(X, X)
    P_cond = _conditional_probabilities(np.asarray(D), perplexity)
    P = (P_cond + P_cond.T) / (2.0 * n)
    P = np.maximum(P, 1e-12)
    np.fill_diagonal(P, 0.0)

    rng = generator(seed, "tsne")
    Y = rng.normal(0.0, 1e-4, size=(n, 2))
    lr = learning_rate if learning_rate is not None else max(n / 12.0, 50.0)
    velocity = np.zeros_like(Y)
    gains = np.ones_like(Y)
    exag_until = min(EXAGGERATION_ITERS, n_iter // 2)
    P_run = P * EARLY_EXAGGERATION
    for it in range(n_iter):
        if it == exag_until:
            P_run = P
        momentum = 0.5 if it < exag_until else 0.8
        grad, _kl = kernels.tsne_grad(np.ascontiguousarray(Y), np.ascontiguousarray(P_run))
        grad = np.asarray(grad)
        same_sign = np.sign(grad) == np.sign(velocity)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, MIN_GAIN, out=gains)
        velocity = momentum * velocity - lr * gains * grad
        Y = Y + velocity
        Y = Y - Y.mean(axis=0)
    return Y
