"""Fairness-risk quantification: correlations with exact significance,
proxy-leakage measurement, and cluster composition reporting.

Binary indicator and protected columns enter correlations as 0/1, where
the product-moment coefficient coincides with the point-biserial one.
P-values use the exact t-distribution tail through the regularized
incomplete beta function, not a normal approximation, so the p < 0.001
threshold is trustworthy at modest n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import betainc

from .learn.protocol import Dataset, SplitError, run_one
from .seeding import derive_int

SIGNIFICANCE = 0.001
DEFAULT_LIFT_FACTOR = 1.5
DIRECT_AUROC = 0.8
INDIRECT_AUROC = 0.7


@dataclass(frozen=True)
class PearsonResult:
    r: Optional[float]
    p: Optional[float]
    n: int


def pearson(x: np.ndarray, y: np.ndarray) -> PearsonResult:
    """Product-moment correlation over pairwise-complete observations,
    with a two-tailed p-value from the t statistic on n-2 dof."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ok = ~(np.isnan(x) | np.isnan(y))
    x, y = x[ok], y[ok]
    n = len(x)
    if n < 3:
        return PearsonResult(None, None, n)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float((dx * dx).sum())
    sy = float((dy * dy).sum())
    if sx == 0.0 or sy == 0.0:
        return PearsonResult(None, None, n)
    r = float((dx * dy).sum()) / math.sqrt(sx * sy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return PearsonResult(r, 0.0, n)
    dof = n - 2
    t2 = r * r * dof / (1.0 - r * r)
    # two-tailed tail mass of the t distribution via I_x(dof/2, 1/2)
    p = float(betainc(dof / 2.0, 0.5, dof / (dof + t2)))
    return PearsonResult(r, p, n)


@dataclass
class CorrelationReport:
    columns: List[str]
    r: np.ndarray  # NaN where undefined
    p: np.ndarray
    n: np.ndarray
    significance: float = SIGNIFICANCE

    def pair(self, a: str, b: str) -> PearsonResult:
        i, j = self.columns.index(a), self.columns.index(b)
        r = self.r[i, j]
        p = self.p[i, j]
        return PearsonResult(
            None if math.isnan(r) else float(r),
            None if math.isnan(p) else float(p),
            int(self.n[i, j]),
        )

    def rows(self) -> List[dict]:
        out = []
        for i, a in enumerate(self.columns):
            for j in range(i + 1, len(self.columns)):
                r = self.r[i, j]
                p = self.p[i, j]
                out.append(
                    {
                        "a": a,
                        "b": self.columns[j],
                        "r": None if math.isnan(r) else float(r),
                        "p": None if math.isnan(p) else float(p),
                        "n": int(self.n[i, j]),
                        "significant": (not math.isnan(p)) and p < self.significance,
                    }
                )
        return out


def correlation_matrix(
    columns: Dict[str, np.ndarray], significance: float = SIGNIFICANCE
) -> CorrelationReport:
    """All-pairs correlations, each over that pair's complete rows."""
    names = list(columns)
    k = len(names)
    arrays = [np.asarray(columns[name], dtype=np.float64) for name in names]
    r = np.full((k, k), np.nan)
    p = np.full((k, k), np.nan)
    n = np.zeros((k, k), dtype=np.int64)
    for i in range(k):
        r[i, i] = 1.0
        p[i, i] = 0.0
        n[i, i] = int((~np.isnan(arrays[i])).sum())
        for j in range(i + 1, k):
            res = pearson(arrays[i], arrays[j])
            n[i, j] = n[j, i] = res.n
            if res.r is not None:
                r[i, j] = r[j, i] = res.r
                p[i, j] = p[j, i] = res.p
    return CorrelationReport(names, r, p, n, significance)


# ---------------------------------------------------------------------------
# Proxy-leakage measurement


@dataclass
class LeakageRun:
    auroc: Optional[float]
    kind: str
    top_features: List[dict]


@dataclass
class AttributeLeakage:
    attribute: str
    auroc_all: Optional[float]
    auroc_stripped: Optional[float]
    best_kind_all: str
    best_kind_stripped: str
    verdict: str  # direct | indirect | none
    top_features_all: List[dict] = field(default_factory=list)
    top_features_stripped: List[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "attribute": self.attribute,
            "auroc_all": self.auroc_all,
            "auroc_stripped": self.auroc_stripped,
            "best_kind_all": self.best_kind_all,
            "best_kind_stripped": self.best_kind_stripped,
            "verdict": self.verdict,
            "top_features_all": self.top_features_all,
            "top_features_stripped": self.top_features_stripped,
        }


@dataclass
class LeakageReport:
    attributes: List[AttributeLeakage]
    stripped_features: List[str]
    skipped: List[dict] = field(default_factory=list)
    thresholds: Dict[str, float] = field(
        default_factory=lambda: {"direct": DIRECT_AUROC, "indirect": INDIRECT_AUROC}
    )

    def for_attribute(self, name: str) -> AttributeLeakage:
        for a in self.attributes:
            if a.attribute == name:
                return a
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "attributes": [a.to_json() for a in self.attributes],
            "stripped_features": self.stripped_features,
            "skipped": self.skipped,
            "thresholds": self.thresholds,
        }


def default_proxy_features(feature_names: Sequence[str]) -> List[str]:
    """Benefit amount and share columns: the flags are defined directly
    from those inflows, so they are the direct proxies to strip."""
    return [n for n in feature_names if n.startswith("benefit_")]


def _best_run(
    X: np.ndarray,
    names: Sequence[str],
    ids: Sequence[str],
    windows: np.ndarray,
    y: np.ndarray,
    kinds: Sequence[str],
    grids: Optional[Dict[str, List[dict]]],
    seed: int,
    cv_folds: int,
    tag: str,
) -> LeakageRun:
    best: Optional[LeakageRun] = None
    dataset = Dataset(list(ids), list(names), X, y, windows)
    for kind in kinds:
        report, _model = run_one(
            dataset,
            target=f"leakage:{tag}",
            kind=kind,
            grid=(grids or {}).get(kind),
            seed=derive_int(seed, "leakage", tag, kind),
            cv_folds=cv_folds,
        )
        if report.auroc is None:
            continue
        top = sorted(report.importances or [], key=lambda d: d["mean"], reverse=True)[:10]
        if best is None or report.auroc > best.auroc:
            best = LeakageRun(report.auroc, kind, top)
    if best is None:
        return LeakageRun(None, "", [])
    return best


def measure_leakage(
    feature_X: np.ndarray,
    feature_names: Sequence[str],
    account_ids: Sequence[str],
    windows: np.ndarray,
    protected: Dict[str, np.ndarray],
    proxy_features: Optional[Sequence[str]] = None,
    kinds: Sequence[str] = ("LR", "RF", "GBT"),
    grids: Optional[Dict[str, List[dict]]] = None,
    seed: int = 0,
    cv_folds: int = 10,
    direct_threshold: float = DIRECT_AUROC,
    indirect_threshold: float = INDIRECT_AUROC,
) -> LeakageReport:
    """Predict each protected attribute from behavioral features twice:
    with all features and with the direct benefit proxies removed."""
    proxy = list(proxy_features) if proxy_features is not None else default_proxy_features(feature_names)
    keep = [j for j, n in enumerate(feature_names) if n not in set(proxy)]
    stripped_names = [feature_names[j] for j in keep]
    X_stripped = feature_X[:, keep]
    results: List[AttributeLeakage] = []
    skipped: List[dict] = []
    for attr, y in protected.items():
        y = np.asarray(y, dtype=np.float64)
        present = ~np.isnan(y)
        if len(np.unique(y[present])) < 2:
            skipped.append({"attribute": attr, "reason": "single class"})
            continue
        try:
            run_all = _best_run(
                feature_X, feature_names, account_ids, windows, y, kinds, grids, seed, cv_folds, f"{attr}:all"
            )
            run_stripped = _best_run(
                X_stripped, stripped_names, account_ids, windows, y, kinds, grids, seed, cv_folds, f"{attr}:stripped"
            )
        except SplitError as exc:
            skipped.append({"attribute": attr, "reason": str(exc)})
            continue
        if run_all.auroc is not None and run_all.auroc >= direct_threshold:
            verdict = "direct"
        elif run_stripped.auroc is not None and run_stripped.auroc >= indirect_threshold:
            verdict = "indirect"
        else:
            verdict = "none"
        results.append(
            AttributeLeakage(
                attribute=attr,
                auroc_all=run_all.auroc,
                auroc_stripped=run_stripped.auroc,
                best_kind_all=run_all.kind,
                best_kind_stripped=run_stripped.kind,
                verdict=verdict,
                top_features_all=run_all.top_features,
                top_features_stripped=run_stripped.top_features,
            )
        )
    return LeakageReport(
        attributes=results,
        stripped_features=proxy,
        skipped=skipped,
        thresholds={"direct": direct_threshold, "indirect": indirect_threshold},
    )


# ---------------------------------------------------------------------------
# Cluster composition


@dataclass
class CompositionReport:
    clusters: List[int]
    sizes: List[int]
    attributes: List[str]
    rates: np.ndarray  # (n_clusters, n_attributes)
    population: np.ndarray  # per attribute
    lifts: np.ndarray
    flagged: np.ndarray  # bool, lift >= factor
    lift_factor: float

    def rows(self) -> List[dict]:
        out = []
        for ci, c in enumerate(self.clusters):
            for j, attr in enumerate(self.attributes):
                out.append(
                    {
                        "cluster": c,
                        "attribute": attr,
                        "rate": float(self.rates[ci, j]),
                        "population_rate": float(self.population[j]),
                        "lift": float(self.lifts[ci, j]),
                        "flagged": bool(self.flagged[ci, j]),
                    }
                )
        return out


def composition(
    assignment: np.ndarray,
    attributes: Dict[str, np.ndarray],
    lift_factor: float = DEFAULT_LIFT_FACTOR,
) -> CompositionReport:
    """Cluster-by-attribute rate table with lift against the population
    rate; cells at or above the lift factor are flagged."""
    assignment = np.asarray(assignment)
    clusters = [int(c) for c in np.unique(assignment)]
    names = list(attributes)
    rates = np.zeros((len(clusters), len(names)))
    sizes = []
    cols = [np.asarray(attributes[name], dtype=np.float64) for name in names]
    for ci, c in enumerate(clusters):
        mask = assignment == c
        sizes.append(int(mask.sum()))
        for j, col in enumerate(cols):
            vals = col[mask]
            present = ~np.isnan(vals)
            rates[ci, j] = float(vals[present].mean()) if present.any() else np.nan
    weights = np.array(sizes, dtype=np.float64) / float(sum(sizes))
    population = weights @ np.where(np.isnan(rates), 0.0, rates)
    with np.errstate(divide="ignore", invalid="ignore"):
        lifts = np.where(population[None, :] > 0, rates / population[None, :], np.nan)
    flagged = np.where(np.isnan(lifts), False, lifts >= lift_factor)
    return CompositionReport(
        clusters=clusters,
        sizes=sizes,
        attributes=names,
        rates=rates,
        population=population,
        lifts=lifts,
        flagged=flagged,
        lift_factor=lift_factor,
    )
