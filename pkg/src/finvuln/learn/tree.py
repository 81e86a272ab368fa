"""CART-style binary decision trees on dense float matrices.

Splits maximize gini decrease (classification) or variance reduction
(regression on residuals); gain ties resolve to the lowest feature
index, then the lowest threshold.  Node expansion is depth-first, left
child first, so per-node feature subsampling consumes the random stream
in a reproducible order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .. import kernels

LEAF = -1


@dataclass
class Tree:
    feature: np.ndarray  # int32, LEAF at leaves
    threshold: np.ndarray  # float64
    left: np.ndarray  # int32
    right: np.ndarray  # int32
    value: np.ndarray  # float64 leaf outputs (internal nodes carry their own estimate)
    importance: np.ndarray  # per-feature weighted impurity decrease

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def leaf_for(self, X: np.ndarray) -> np.ndarray:
        return kernels.tree_leaf(
            self.feature, self.threshold, self.left, self.right, np.ascontiguousarray(X)
        )

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.leaf_for(X)]

    def to_json(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "importance": self.importance.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Tree":
        return cls(
            feature=np.array(obj["feature"], dtype=np.int32),
            threshold=np.array(obj["threshold"], dtype=np.float64),
            left=np.array(obj["left"], dtype=np.int32),
            right=np.array(obj["right"], dtype=np.int32),
            value=np.array(obj["value"], dtype=np.float64),
            importance=np.array(obj["importance"], dtype=np.float64),
        )


class _Builder:
    def __init__(
        self,
        X: np.ndarray,
        target: np.ndarray,
        mode: str,
        max_depth: Optional[int],
        max_features: Optional[int],
        min_leaf: int,
        rng: Optional[np.random.Generator],
        hessian: Optional[np.ndarray],
    ):
        self.X = X
        self.target = target
        self.mode = mode
        self.max_depth = max_depth
        self.max_features = max_features
        self.min_leaf = min_leaf
        self.rng = rng
        self.hessian = hessian
        self.n_root = len(target)
        self.d = X.shape[1]
        self.feature: List[int] = []
        self.threshold: List[float] = []
        self.left: List[int] = []
        self.right: List[int] = []
        self.value: List[float] = []
        self.importance = np.zeros(self.d)

    def _leaf_value(self, idx: np.ndarray) -> float:
        t = self.target[idx]
        if self.mode == "cls":
            return float(t.mean())
        if self.hessian is None:
            return float(t.mean())
        h = float(self.hessian[idx].sum())
        return float(t.sum()) / (h + 1e-9)

    def _candidates(self) -> np.ndarray:
        if self.max_features is None or self.max_features >= self.d:
            return np.arange(self.d, dtype=np.int64)
        chosen = self.rng.choice(self.d, size=self.max_features, replace=False)
        return np.sort(chosen)

    def build(self, idx: np.ndarray, depth: int) -> int:
        # explicit stack, left child expanded first, preserving the
        # pre-order node numbering and random draw order of a recursive build
        root = len(self.feature)
        stack = [(idx, depth, LEAF, False)]
        while stack:
            idx, depth, parent, is_left = stack.pop()
            node = len(self.feature)
            if parent != LEAF:
                if is_left:
                    self.left[parent] = node
                else:
                    self.right[parent] = node
            self.feature.append(LEAF)
            self.threshold.append(0.0)
            self.left.append(LEAF)
            self.right.append(LEAF)
            self.value.append(self._leaf_value(idx))

            n = len(idx)
            if (self.max_depth is not None and depth >= self.max_depth) or n < 2 * self.min_leaf:
                continue
            feats = self._candidates()
            Xn = np.ascontiguousarray(self.X[np.ix_(idx, feats)])
            if self.mode == "cls":
                y = np.ascontiguousarray(self.target[idx])
                f_local, thr, gain = kernels.best_split_cls(Xn, y, self.min_leaf)
            else:
                r = np.ascontiguousarray(self.target[idx])
                f_local, thr, gain = kernels.best_split_reg(Xn, r, self.min_leaf)
            if f_local == kernels.NO_SPLIT:
                continue
            f_global = int(feats[f_local])
            go_left = self.X[idx, f_global] <= thr
            left_idx = idx[go_left]
            right_idx = idx[~go_left]
            if len(left_idx) == 0 or len(right_idx) == 0:  # numeric guard
                continue
            self.feature[node] = f_global
            self.threshold[node] = float(thr)
            self.importance[f_global] += (n / self.n_root) * gain
            stack.append((right_idx, depth + 1, node, False))
            stack.append((left_idx, depth + 1, node, True))
        return root

    def finish(self) -> Tree:
        return Tree(
            feature=np.array(self.feature, dtype=np.int32),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int32),
            right=np.array(self.right, dtype=np.int32),
            value=np.array(self.value, dtype=np.float64),
            importance=self.importance,
        )


def grow_classification_tree(
    X: np.ndarray,
    y: np.ndarray,
    max_depth: Optional[int] = None,
    max_features: Optional[int] = None,
    min_leaf: int = 1,
    rng: Optional[np.random.Generator] = None,
) -> Tree:
    builder = _Builder(X, y.astype(np.float64), "cls", max_depth, max_features, min_leaf, rng, None)
    builder.build(np.arange(len(y), dtype=np.int64), 0)
    return builder.finish()


def grow_regression_tree(
    X: np.ndarray,
    residuals: np.ndarray,
    hessian: Optional[np.ndarray] = None,
    max_depth: Optional[int] = None,
    max_features: Optional[int] = None,
    min_leaf: int = 1,
    rng: Optional[np.random.Generator] = None,
) -> Tree:
    builder = _Builder(
        X, residuals.astype(np.float64), "reg", max_depth, max_features, min_leaf, rng, hessian
    )
    builder.build(np.arange(len(residuals), dtype=np.int64), 0)
    return builder.finish()
