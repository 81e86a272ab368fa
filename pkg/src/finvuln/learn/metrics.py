"""Binary-classification evaluation metrics."""

from __future__ import annotations

import math
from typing import Dict, Optional, Tuple

import numpy as np


def auroc(labels: np.ndarray, scores: np.ndarray) -> Optional[float]:
    """Probability a random positive outscores a random negative, with
    0.5 credit for ties (Mann-Whitney).  None when a class is absent."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    # average ranks over tie groups (1-based)
    i = 0
    n = len(scores)
    while i < n:
        j = i
        while j + 1 < n and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum = float(ranks[pos].sum())
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def confusion_counts(labels: np.ndarray, predictions: np.ndarray) -> Dict[str, int]:
    labels = np.asarray(labels).astype(int)
    predictions = np.asarray(predictions).astype(int)
    return {
        "tp": int(((labels == 1) & (predictions == 1)).sum()),
        "fp": int(((labels == 0) & (predictions == 1)).sum()),
        "tn": int(((labels == 0) & (predictions == 0)).sum()),
        "fn": int(((labels == 1) & (predictions == 0)).sum()),
    }


def threshold_metrics(
    labels: np.ndarray, scores: np.ndarray, cutoff: float = 0.5
) -> Tuple[Dict[str, float], Dict[str, int]]:
    """Accuracy/precision/recall/F1 at the score cutoff (>= is positive).

    Precision is 0 when nothing is predicted positive; recall is 0 when
    there are no positives.
    """
    predictions = (np.asarray(scores, dtype=np.float64) >= cutoff).astype(int)
    counts = confusion_counts(labels, predictions)
    tp, fp, tn, fn = counts["tp"], counts["fp"], counts["tn"], counts["fn"]
    total = tp + fp + tn + fn
    accuracy = (tp + tn) / total if total else math.nan
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return (
        {"accuracy": accuracy, "precision": precision, "recall": recall, "f1": f1},
        counts,
    )
