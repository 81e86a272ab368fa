"""Random forests and gradient-boosted trees for binary targets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .tree import Tree, grow_classification_tree, grow_regression_tree


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _resolve_max_features(spec, d: int) -> Optional[int]:
    if spec is None:
        return None
    if spec == "sqrt":
        return max(1, int(math.sqrt(d)))
    return int(spec)


@dataclass
class RandomForest:
    trees: List[Tree]
    n_features: int
    params: Dict = field(default_factory=dict)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        acc = np.zeros(X.shape[0])
        for tree in self.trees:
            acc += tree.predict(X)
        return acc / len(self.trees)

    def to_json(self) -> dict:
        return {
            "kind": "RF",
            "n_features": self.n_features,
            "params": self.params,
            "trees": [t.to_json() for t in self.trees],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RandomForest":
        return cls(
            trees=[Tree.from_json(t) for t in obj["trees"]],
            n_features=int(obj["n_features"]),
            params=obj.get("params", {}),
        )


def train_random_forest(
    X: np.ndarray,
    y: np.ndarray,
    n_trees: int = 200,
    max_depth: Optional[int] = None,
    max_features="sqrt",
    min_leaf: int = 1,
    seed: int = 0,
) -> RandomForest:
    """Bootstrap-bagged gini trees with per-split feature subsampling.

    Each tree owns a pre-assigned random stream, so results do not
    depend on training order.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    mf = _resolve_max_features(max_features, d)
    streams = np.random.SeedSequence(seed).spawn(n_trees)
    trees = []
    for t in range(n_trees):
        rng = np.random.Generator(np.random.PCG64(streams[t]))
        boot = rng.integers(0, n, size=n)
        tree = grow_classification_tree(
            X[boot], y[boot], max_depth=max_depth, max_features=mf, min_leaf=min_leaf, rng=rng
        )
        trees.append(tree)
    return RandomForest(
        trees=trees,
        n_features=d,
        params={
            "n_trees": n_trees,
            "max_depth": max_depth,
            "max_features": max_features,
            "min_leaf": min_leaf,
            "seed": seed,
        },
    )


@dataclass
class GradientBoosting:
    trees: List[Tree]
    base_score: float
    shrinkage: float
    n_features: int
    train_losses: List[float] = field(default_factory=list)
    params: Dict = field(default_factory=dict)

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        f = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            f += self.shrinkage * tree.predict(X)
        return f

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self.decision_function(X))

    def to_json(self) -> dict:
        return {
            "kind": "GBT",
            "base_score": self.base_score,
            "shrinkage": self.shrinkage,
            "n_features": self.n_features,
            "train_losses": self.train_losses,
            "params": self.params,
            "trees": [t.to_json() for t in self.trees],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GradientBoosting":
        return cls(
            trees=[Tree.from_json(t) for t in obj["trees"]],
            base_score=float(obj["base_score"]),
            shrinkage=float(obj["shrinkage"]),
            n_features=int(obj["n_features"]),
            train_losses=list(obj.get("train_losses", [])),
            params=obj.get("params", {}),
        )


def _log_loss(y: np.ndarray, f: np.ndarray) -> float:
    m = np.where(y == 1, f, -f)
    return float(np.logaddexp(0.0, -m).mean())


def train_gradient_boosting(
    X: np.ndarray,
    y: np.ndarray,
    n_trees: int = 200,
    max_depth: int = 3,
    shrinkage: float = 0.1,
    min_leaf: int = 1,
    seed: int = 0,
    leaf_clip: float = 10.0,
) -> GradientBoosting:
    """Stagewise regression trees on the logistic-loss gradient.

    Leaf outputs take a damped Newton step (gradient sum over hessian
    sum, clipped) so the shrunk stage update keeps the training loss
    non-increasing.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    p_bar = min(max(float(y.mean()), 1e-6), 1.0 - 1e-6)
    base = math.log(p_bar / (1.0 - p_bar))
    f = np.full(n, base)
    trees: List[Tree] = []
    losses: List[float] = []
    streams = np.random.SeedSequence(seed).spawn(max(n_trees, 1))
    for t in range(n_trees):
        p = _sigmoid(f)
        residuals = y - p
        hessian = np.maximum(p * (1.0 - p), 1e-9)
        rng = np.random.Generator(np.random.PCG64(streams[t]))
        tree = grow_regression_tree(
            X, residuals, hessian=hessian, max_depth=max_depth, min_leaf=min_leaf, rng=rng
        )
        np.clip(tree.value, -leaf_clip, leaf_clip, out=tree.value)
        f = f + shrinkage * tree.predict(X)
        trees.append(tree)
        losses.append(_log_loss(y, f))
    return GradientBoosting(
        trees=trees,
        base_score=base,
        shrinkage=shrinkage,
        n_features=d,
        train_losses=losses,
        params={
            "n_trees": n_trees,
            "max_depth": max_depth,
            "shrinkage": shrinkage,
            "min_leaf": min_leaf,
            "seed": seed,
        },
    )


def feature_importance(model) -> Tuple[np.ndarray, np.ndarray]:
    """(normalized mean, matching-scale SD) of per-tree accumulated
    impurity decrease.  Raises TypeError for models without trees."""
    trees = getattr(model, "trees", None)
    if not trees:
        raise TypeError("importance requires trees")
    mat = np.vstack([t.importance for t in trees])
    mean = mat.mean(axis=0)
    sd = mat.std(axis=0)
    total = mean.sum()
    if total > 0:
        return mean / total, sd / total
    return mean, sd
