"""Out-of-time training protocol: split, balance, impute, grid-search
with cross-validation, and evaluation over every target.

Training rows come from one three-month window and are sampled to an
80/20 scheme with class ratios preserved; the holdout comes from the
window shifted three months forward and keeps its natural class mix.
The training majority class is then down-sampled to balance, while the
test set stays untouched.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..seeding import derive_int, generator
from .ensemble import (
    GradientBoosting,
    RandomForest,
    feature_importance,
    train_gradient_boosting,
    train_random_forest,
)
from .linear import LogisticModel, train_logistic
from .metrics import auroc, threshold_metrics

MODEL_KINDS = ("LR", "RF", "GBT")
MODEL_FORMAT = "finvuln-model/1"

DEFAULT_GRIDS: Dict[str, List[dict]] = {
    "LR": [{"l2": 0.01}, {"l2": 0.1}, {"l2": 1.0}],
    "RF": [
        {"n_trees": 200, "max_depth": None},
        {"n_trees": 200, "max_depth": 8},
    ],
    "GBT": [
        {"n_trees": 200, "max_depth": 3, "shrinkage": 0.05},
        {"n_trees": 200, "max_depth": 3, "shrinkage": 0.1},
        {"n_trees": 200, "max_depth": 5, "shrinkage": 0.05},
        {"n_trees": 200, "max_depth": 5, "shrinkage": 0.1},
    ],
}


class SplitError(ValueError):
    pass


@dataclass
class Dataset:
    account_ids: List[str]
    names: List[str]
    X: np.ndarray  # float64, NaN missing
    y: np.ndarray  # float64 0/1, NaN missing
    window: np.ndarray  # int64 three-month window key per row

    def complete_target(self) -> "Dataset":
        keep = ~np.isnan(self.y)
        return Dataset(
            [a for a, k in zip(self.account_ids, keep) if k],
            self.names,
            self.X[keep],
            self.y[keep],
            self.window[keep],
        )


@dataclass
class SplitPlan:
    train_fraction: float = 0.8
    test_fraction: float = 0.2
    train_window: Optional[int] = None  # None: densest window with a successor
    seed: int = 0


def _stratified_sample(
    y: np.ndarray, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Indices of a class-ratio-preserving sample without replacement."""
    n = len(y)
    size = min(size, n)
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    n_pos = int(round(size * len(pos) / n))
    n_pos = min(max(n_pos, 0), len(pos))
    n_neg = min(size - n_pos, len(neg))
    take_pos = rng.choice(pos, size=n_pos, replace=False) if n_pos else np.empty(0, dtype=np.int64)
    take_neg = rng.choice(neg, size=n_neg, replace=False) if n_neg else np.empty(0, dtype=np.int64)
    return np.sort(np.concatenate([take_pos, take_neg]).astype(np.int64))


def split_out_of_time(dataset: Dataset, plan: SplitPlan = SplitPlan()) -> Tuple[Dataset, Dataset]:
    """Train on one window, test on the next one (out of time and out of
    sample); both sides are stratified samples of their windows."""
    ds = dataset.complete_target()
    if len(ds.y) == 0:
        raise SplitError("no rows with a target")
    windows = np.unique(ds.window)
    if plan.train_window is not None:
        train_w = plan.train_window
        if (ds.window == train_w + 1).sum() == 0:
            raise SplitError(f"no later window: window {train_w + 1} is empty")
    else:
        candidates = [w for w in windows if (ds.window == w + 1).any()]
        if not candidates:
            raise SplitError("no later window: all rows fall in one three-month window")
        train_w = max(candidates, key=lambda w: int((ds.window == w).sum()))
    test_w = train_w + 1
    in_a = np.flatnonzero(ds.window == train_w)
    in_b = np.flatnonzero(ds.window == test_w)
    n_total = len(in_a) + len(in_b)
    rng = generator(plan.seed, "split")
    train_size = min(int(round(plan.train_fraction * n_total)), len(in_a))
    test_size = min(int(round(plan.test_fraction * n_total)), len(in_b))
    take_a = in_a[_stratified_sample(ds.y[in_a], train_size, rng)]
    take_b = in_b[_stratified_sample(ds.y[in_b], test_size, rng)]

    def _subset(rows: np.ndarray) -> Dataset:
        return Dataset(
            [ds.account_ids[i] for i in rows], ds.names, ds.X[rows], ds.y[rows], ds.window[rows]
        )

    train, test = _subset(take_a), _subset(take_b)
    for part, name in ((train, "train"), (test, "test")):
        if len(np.unique(part.y)) < 2:
            raise SplitError(f"{name} window has a single class")
    return train, test


def balance_training(train: Dataset, seed: int = 0) -> Dataset:
    """Down-sample the majority class (without replacement) to the
    minority count; the test set is never touched."""
    y = train.y
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if len(pos) == 0 or len(neg) == 0:
        raise SplitError("both classes required to balance")
    rng = generator(seed, "balance")
    if len(pos) > len(neg):
        pos = np.sort(rng.choice(pos, size=len(neg), replace=False))
    elif len(neg) > len(pos):
        neg = np.sort(rng.choice(neg, size=len(pos), replace=False))
    keep = np.sort(np.concatenate([pos, neg]))
    return Dataset(
        [train.account_ids[i] for i in keep],
        train.names,
        train.X[keep],
        train.y[keep],
        train.window[keep],
    )


# ---------------------------------------------------------------------------
# Imputation and standardization


@dataclass
class Imputer:
    """Training-median fill plus a missing-indicator column per feature
    that had training missingness; zero-variance columns are dropped."""

    medians: np.ndarray
    keep: np.ndarray  # bool per original column
    indicator_for: np.ndarray  # bool per original column
    names: List[str]
    dropped: List[str]

    @classmethod
    def fit(cls, X: np.ndarray, names: Sequence[str]) -> "Imputer":
        n, d = X.shape
        medians = np.zeros(d)
        keep = np.ones(d, dtype=bool)
        indicator_for = np.zeros(d, dtype=bool)
        for j in range(d):
            col = X[:, j]
            present = ~np.isnan(col)
            if not present.any():
                keep[j] = False
                continue
            medians[j] = float(np.median(col[present]))
            filled = np.where(present, col, medians[j])
            if filled.min() == filled.max():
                keep[j] = False
                continue
            if not present.all():
                indicator_for[j] = True
        dropped = [names[j] for j in range(d) if not keep[j]]
        if dropped:
            warnings.warn(f"dropping degenerate features: {dropped}", stacklevel=2)
        out_names = [names[j] for j in range(d) if keep[j]] + [
            f"{names[j]}__missing" for j in range(d) if keep[j] and indicator_for[j]
        ]
        return cls(medians, keep, indicator_for, out_names, dropped)

    def transform(self, X: np.ndarray) -> np.ndarray:
        miss = np.isnan(X)
        filled = np.where(miss, self.medians[None, :], X)
        parts = [filled[:, self.keep]]
        ind_cols = self.keep & self.indicator_for
        if ind_cols.any():
            parts.append(miss[:, ind_cols].astype(np.float64))
        return np.ascontiguousarray(np.hstack(parts))

    def to_json(self) -> dict:
        return {
            "medians": self.medians.tolist(),
            "keep": self.keep.astype(int).tolist(),
            "indicator_for": self.indicator_for.astype(int).tolist(),
            "names": self.names,
            "dropped": self.dropped,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Imputer":
        return cls(
            medians=np.array(obj["medians"], dtype=np.float64),
            keep=np.array(obj["keep"], dtype=bool),
            indicator_for=np.array(obj["indicator_for"], dtype=bool),
            names=list(obj["names"]),
            dropped=list(obj["dropped"]),
        )


@dataclass
class Standardizer:
    mean: np.ndarray
    sd: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        sd = X.std(axis=0)
        sd = np.where(sd == 0, 1.0, sd)
        return cls(mean, sd)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.sd

    def to_json(self) -> dict:
        return {"mean": self.mean.tolist(), "sd": self.sd.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "Standardizer":
        return cls(np.array(obj["mean"]), np.array(obj["sd"]))


# ---------------------------------------------------------------------------
# Training with grid search


@dataclass
class TrainedModel:
    kind: str
    model: object
    imputer: Imputer
    standardizer: Optional[Standardizer]
    hyperparams: dict
    cv_table: List[dict]
    seed: int

    def predict_proba(self, X_raw: np.ndarray) -> np.ndarray:
        X = self.imputer.transform(X_raw)
        if self.standardizer is not None:
            X = self.standardizer.transform(X)
        return self.model.predict_proba(X)

    def to_json(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "kind": self.kind,
            "hyperparams": {k: v for k, v in self.hyperparams.items()},
            "cv_table": self.cv_table,
            "seed": self.seed,
            "imputer": self.imputer.to_json(),
            "standardizer": self.standardizer.to_json() if self.standardizer else None,
            "model": self.model.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TrainedModel":
        if obj.get("format") != MODEL_FORMAT:
            raise ValueError(f"unsupported model format {obj.get('format')!r}")
        kind = obj["kind"]
        model_obj = obj["model"]
        if kind == "LR":
            model = LogisticModel.from_json(model_obj)
        elif kind == "RF":
            model = RandomForest.from_json(model_obj)
        elif kind == "GBT":
            model = GradientBoosting.from_json(model_obj)
        else:
            raise ValueError(f"unknown model kind {kind!r}")
        std = obj.get("standardizer")
        return cls(
            kind=kind,
            model=model,
            imputer=Imputer.from_json(obj["imputer"]),
            standardizer=Standardizer.from_json(std) if std else None,
            hyperparams=obj["hyperparams"],
            cv_table=obj.get("cv_table", []),
            seed=int(obj["seed"]),
        )


def save_model(model: TrainedModel, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(model.to_json()), encoding="utf-8")


def load_model(path: Union[str, Path]) -> TrainedModel:
    return TrainedModel.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _fit_kind(kind: str, X: np.ndarray, y: np.ndarray, params: dict, seed: int):
    if kind == "LR":
        return train_logistic(X, y, l2=params.get("l2", 0.1))
    if kind == "RF":
        return train_random_forest(
            X,
            y,
            n_trees=params.get("n_trees", 200),
            max_depth=params.get("max_depth"),
            max_features=params.get("max_features", "sqrt"),
            min_leaf=params.get("min_leaf", 1),
            seed=seed,
        )
    if kind == "GBT":
        return train_gradient_boosting(
            X,
            y,
            n_trees=params.get("n_trees", 200),
            max_depth=params.get("max_depth", 3),
            shrinkage=params.get("shrinkage", 0.1),
            min_leaf=params.get("min_leaf", 1),
            seed=seed,
        )
    raise ValueError(f"unknown model kind {kind!r}")


def _stratified_folds(y: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Fold id per row; classes are shuffled then dealt round-robin."""
    fold = np.empty(len(y), dtype=np.int64)
    for cls_value in (0, 1):
        rows = np.flatnonzero(y == cls_value)
        rows = rng.permutation(rows)
        fold[rows] = np.arange(len(rows)) % k
    return fold


def train(
    kind: str,
    train_set: Dataset,
    grid: Optional[List[dict]] = None,
    seed: int = 0,
    cv_folds: int = 10,
) -> TrainedModel:
    """Grid search by mean k-fold CV AUROC on the balanced training set,
    then refit of the winning point on the full set.

    A single-point grid skips CV (nothing to select).  Ties go to the
    first grid point.
    """
    if len(np.unique(train_set.y)) < 2:
        raise SplitError("single class")
    grid = grid if grid is not None else DEFAULT_GRIDS[kind]
    imputer = Imputer.fit(train_set.X, train_set.names)
    X = imputer.transform(train_set.X)
    y = train_set.y.astype(np.float64)
    standardizer = Standardizer.fit(X) if kind == "LR" else None
    if standardizer is not None:
        X = standardizer.transform(X)

    cv_table: List[dict] = []
    if len(grid) == 1:
        best_params = grid[0]
    else:
        rng = generator(seed, "cv-folds", kind)
        folds = _stratified_folds(y, cv_folds, rng)
        best_params, best_score = None, -math.inf
        for gi, params in enumerate(grid):
            scores = []
            for f in range(cv_folds):
                tr = folds != f
                va = ~tr
                if len(np.unique(y[va])) < 2 or len(np.unique(y[tr])) < 2:
                    continue
                fit_seed = derive_int(seed, "cv", kind, str(gi), str(f))
                model = _fit_kind(kind, X[tr], y[tr], params, fit_seed)
                score = auroc(y[va], model.predict_proba(X[va]))
                if score is not None:
                    scores.append(score)
            mean_score = float(np.mean(scores)) if scores else -math.inf
            cv_table.append({"params": params, "cv_auroc": mean_score, "n_folds": len(scores)})
            if mean_score > best_score:
                best_params, best_score = params, mean_score
        if best_params is None:
            best_params = grid[0]
    fit_seed = derive_int(seed, "refit", kind)
    model = _fit_kind(kind, X, y, best_params, fit_seed)
    return TrainedModel(
        kind=kind,
        model=model,
        imputer=imputer,
        standardizer=standardizer,
        hyperparams=dict(best_params),
        cv_table=cv_table,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Evaluation


@dataclass
class EvalReport:
    target: str
    kind: str
    auroc: Optional[float]
    metrics: Dict[str, float]
    confusion: Dict[str, int]
    n_train: int
    n_test: int
    train_window: int
    test_window: int
    hyperparams: dict
    seed: int
    importances: Optional[List[dict]] = None  # name/mean/sd, tree models only
    cv_table: List[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "target": self.target,
            "kind": self.kind,
            "auroc": self.auroc,
            "metrics": self.metrics,
            "confusion": self.confusion,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "train_window": self.train_window,
            "test_window": self.test_window,
            "hyperparams": self.hyperparams,
            "seed": self.seed,
            "importances": self.importances,
            "cv_table": self.cv_table,
        }


def evaluate(model: TrainedModel, test_set: Dataset) -> Tuple[Optional[float], Dict[str, float], Dict[str, int]]:
    scores = model.predict_proba(test_set.X)
    y = test_set.y.astype(int)
    metrics, confusion = threshold_metrics(y, scores)
    return auroc(y, scores), metrics, confusion


def importance_rows(model: TrainedModel) -> Optional[List[dict]]:
    if model.kind == "LR":
        return None
    mean, sd = feature_importance(model.model)
    names = model.imputer.names
    return [
        {"feature": names[j], "mean": float(mean[j]), "sd": float(sd[j])}
        for j in range(len(names))
    ]


def run_one(
    dataset: Dataset,
    target: str,
    kind: str,
    grid: Optional[List[dict]] = None,
    seed: int = 0,
    cv_folds: int = 10,
    plan: Optional[SplitPlan] = None,
) -> Tuple[EvalReport, TrainedModel]:
    split_seed = derive_int(seed, "split", target)
    plan = plan or SplitPlan(seed=split_seed)
    train_set, test_set = split_out_of_time(dataset, plan)
    balanced = balance_training(train_set, seed=derive_int(seed, "balance", target))
    model = train(kind, balanced, grid=grid, seed=derive_int(seed, "train", target, kind), cv_folds=cv_folds)
    roc, metrics, confusion = evaluate(model, test_set)
    report = EvalReport(
        target=target,
        kind=kind,
        auroc=roc,
        metrics=metrics,
        confusion=confusion,
        n_train=len(balanced.y),
        n_test=len(test_set.y),
        train_window=int(train_set.window[0]),
        test_window=int(test_set.window[0]),
        hyperparams=model.hyperparams,
        seed=seed,
        importances=importance_rows(model),
        cv_table=model.cv_table,
    )
    return report, model


def run_matrix(
    feature_X: np.ndarray,
    feature_names: Sequence[str],
    account_ids: Sequence[str],
    windows: np.ndarray,
    targets: Dict[str, np.ndarray],
    grids: Optional[Dict[str, List[dict]]] = None,
    kinds: Sequence[str] = MODEL_KINDS,
    seed: int = 0,
    cv_folds: int = 10,
    keep_models: bool = False,
) -> Tuple[List[EvalReport], List[dict], Dict[Tuple[str, str], TrainedModel]]:
    """One report per (target, model kind); degenerate targets are
    skipped and listed with their reason."""
    grids = grids or {}
    reports: List[EvalReport] = []
    skipped: List[dict] = []
    models: Dict[Tuple[str, str], TrainedModel] = {}
    for target_name, y in targets.items():
        dataset = Dataset(list(account_ids), list(feature_names), feature_X, y, windows)
        for kind in kinds:
            try:
                report, model = run_one(
                    dataset,
                    target_name,
                    kind,
                    grid=grids.get(kind),
                    seed=seed,
                    cv_folds=cv_folds,
                )
                reports.append(report)
                if keep_models:
                    models[(target_name, kind)] = model
            except SplitError as exc:
                skipped.append({"target": target_name, "kind": kind, "reason": str(exc)})
    return reports, skipped, models
