"""Engineered financial-behavior features for one account.

Features are grouped into inflow, outflow, temporal, distress,
resilience, planning, aid and inclusion families.  All amount-based
features are monthly averages in pence over the account's calendar-month
span; missing values (undefined ratios, too-short series) are explicit
``None`` / NaN, never silently zero.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import kernels
from .ingest import AccountHistory, detect_salary_inflows
from .rules import DEFAULT_RULES, KeywordRuleSet, normalize_reference
from .taxonomy import (
    CATEGORIES,
    CATEGORY_INDEX,
    Category,
    DEFAULT_FLOW_CLASSES,
    FlowClass,
    BENEFIT_CATEGORIES,
    BENEFIT_SUBTYPES,
    INCOME_CATEGORIES,
    SAVINGS_CATEGORIES,
    SPEND_CATEGORIES,
)

SHOCK_PENCE = 10_000  # £100 reference shock for the resilience proportion

MISSING = float("nan")


# ---------------------------------------------------------------------------
# Temporal statistics


@dataclass(frozen=True)
class SeriesStats:
    mu: float
    sigma: float  # population standard deviation
    n: int

    @classmethod
    def from_values(cls, values: np.ndarray) -> "SeriesStats":
        values = np.asarray(values, dtype=np.float64)
        return cls(float(values.mean()), float(values.std()), len(values))


def persistence(vectors: Union[np.ndarray, Sequence[Sequence[float]]]) -> Optional[float]:
    """Average cosine similarity of adjacent interval spend vectors.

    Pairs where either vector is all-zero are skipped (an empty interval
    is not evidence of dissimilarity); returns None with fewer than two
    vectors or when every pair was skipped.
    """
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 2:
        return None
    if np.any(arr < 0):
        raise ValueError("interval vectors must be non-negative")
    norms = np.sqrt((arr * arr).sum(axis=1))
    a, b = norms[:-1], norms[1:]
    valid = (a > 0) & (b > 0)
    if not valid.any():
        return None
    dots = (arr[:-1] * arr[1:]).sum(axis=1)
    cos = dots[valid] / (a[valid] * b[valid])
    return float(np.clip(cos, 0.0, 1.0).mean())


def burstiness(gaps: Union[np.ndarray, Sequence[int]]) -> Optional[float]:
    """(r - 1) / (r + 1) with r the coefficient of variation of inter-event
    day gaps; -1 is perfectly regular, 0 random, toward 1 bursty."""
    gaps = np.asarray(gaps, dtype=np.float64)
    if len(gaps) < 2:
        return None
    mu = float(gaps.mean())
    if mu == 0.0:
        return None
    r = float(gaps.std()) / mu
    return (r - 1.0) / (r + 1.0)


def volatility(values: Union[np.ndarray, Sequence[float], SeriesStats]) -> Optional[float]:
    """Second-order coefficient of variation, bounded in [0, 1)."""
    if isinstance(values, SeriesStats):
        stats = values
    else:
        values = np.asarray(values, dtype=np.float64)
        if len(values) < 2:
            return None
        stats = SeriesStats.from_values(values)
    if stats.n < 2 or stats.mu == 0.0:
        return None
    # sigma / sqrt(mu^2 + sigma^2) == sqrt((s/m)^2 / (1 + (s/m)^2)), overflow-safe
    return float(stats.sigma / math.hypot(stats.mu, stats.sigma))


# ---------------------------------------------------------------------------
# Per-history aggregation


def eod_balance_series(history: AccountHistory) -> Tuple[int, np.ndarray]:
    """(first ordinal day, end-of-day balance for every day of the span)."""
    if len(history) == 0:
        raise ValueError("empty history")
    eod = kernels.eod_expand(
        np.ascontiguousarray(history.days, dtype=np.int32),
        np.ascontiguousarray(history.balances, dtype=np.int64),
    )
    return int(history.days[0]), np.asarray(eod, dtype=np.int64)


def _month_starts(history: AccountHistory) -> np.ndarray:
    """Ordinal of the first day of each span month, plus one past the end."""
    import datetime as dt

    mk0 = int(history.month_keys[0])
    mk1 = int(history.month_keys[-1])
    starts = []
    for mk in range(mk0, mk1 + 2):
        starts.append(dt.date(mk // 12, mk % 12 + 1, 1).toordinal())
    return np.array(starts, dtype=np.int64)


class HistoryAggregates:
    """One-pass aggregation bundle shared by the feature functions.

    Precomputes monthly/weekly groupings, keyword tags, salary flags and
    the end-of-day balance grid so each feature is a cheap lookup.
    """

    def __init__(
        self,
        history: AccountHistory,
        rules: KeywordRuleSet = DEFAULT_RULES,
        flow_classes: Dict[Category, FlowClass] = None,
    ):
        if len(history) == 0:
            raise ValueError("empty history")
        self.history = history
        self.rules = rules
        flow_classes = flow_classes or DEFAULT_FLOW_CLASSES
        self.n_months = history.span_months
        self.month_off = (history.month_keys - history.month_keys[0]).astype(np.int64)

        fc = np.array(
            [
                {
                    FlowClass.FIXED: 0,
                    FlowClass.FLEXIBLE: 1,
                    FlowClass.INFLOW: 2,
                    FlowClass.TRANSFER: 3,
                    FlowClass.EXCLUDED: 4,
                }[flow_classes[c]]
                for c in CATEGORIES
            ],
            dtype=np.int8,
        )
        self.txn_flow = fc[history.categories]
        amounts = history.amounts
        self.outflow_amount = np.where(amounts < 0, -amounts, 0).astype(np.int64)
        self.inflow_amount = np.where(amounts > 0, amounts, 0).astype(np.int64)

        self.is_fixed_spend = (self.txn_flow == 0) & (amounts < 0)
        self.is_flex_spend = (self.txn_flow == 1) & (amounts < 0)
        self.is_spend = self.is_fixed_spend | self.is_flex_spend

        # keyword tags, one classification per transaction
        tags = [rules.classify_detailed(d) for d in history.descriptions]
        self.tags = tags
        self.gambling_mask = np.array(
            ["gambling" in t for t in tags], dtype=bool
        ) | (history.categories == CATEGORY_INDEX[Category.GAMBLING.value])
        self.bnpl_mask = np.array(["bnpl" in t for t in tags], dtype=bool)
        self.payday_any = any("payday" in t for t in tags)
        self.provider_terms = {
            k: set()
            for k in ("traditional_card", "nontraditional_card", "traditional_loan", "nontraditional_loan")
        }
        for t in tags:
            for klass in self.provider_terms:
                if klass in t:
                    self.provider_terms[klass].update(t[klass])

        self.salary_flags = detect_salary_inflows(history, rules)

        # monthly sums
        self.fixed_by_month = self._monthly_sum(self.outflow_amount, self.is_fixed_spend)
        self.flex_by_month = self._monthly_sum(self.outflow_amount, self.is_flex_spend)
        self.total_by_month = self.fixed_by_month + self.flex_by_month

        income_cats = {CATEGORY_INDEX[c.value] for c in INCOME_CATEGORIES}
        self.is_income = np.isin(history.categories, list(income_cats)) & (amounts > 0)
        self.income_by_month = self._monthly_sum(self.inflow_amount, self.is_income)
        self.salary_by_month = self._monthly_sum(self.inflow_amount, self.salary_flags)
        loans_idx = CATEGORY_INDEX[Category.LOANS.value]
        self.loan_inflow_total = int(self.inflow_amount[history.categories == loans_idx].sum())

        # end-of-day balances and month slots for every day of the span
        self.first_day, self.eod = eod_balance_series(history)
        starts = _month_starts(history)
        grid_days = np.arange(self.first_day, self.first_day + len(self.eod), dtype=np.int64)
        self.day_month = np.searchsorted(starts, grid_days, side="right") - 1
        self._balance_stats = None
        self._od_profile = None

    def _monthly_sum(self, weights: np.ndarray, mask: np.ndarray) -> np.ndarray:
        return np.bincount(
            self.month_off[mask], weights=weights[mask].astype(np.float64), minlength=self.n_months
        ).astype(np.int64)

    def _monthly_count(self, mask: np.ndarray) -> np.ndarray:
        return np.bincount(self.month_off[mask], minlength=self.n_months)

    def category_month_sums(self, cat: Category, outflow: bool = True) -> np.ndarray:
        idx = CATEGORY_INDEX[cat.value]
        mask = self.history.categories == idx
        if outflow:
            return self._monthly_sum(self.outflow_amount, mask & (self.history.amounts < 0))
        return self._monthly_sum(self.inflow_amount, mask & (self.history.amounts > 0))

    def category_total(self, cat: Category, outflow: bool = True) -> int:
        return int(self.category_month_sums(cat, outflow).sum())

    # -- balance statistics ------------------------------------------------

    def balance_stats(self):
        """Per-month (median, mean, min, max) of end-of-day balances."""
        if self._balance_stats is None:
            med = np.empty(self.n_months)
            mean = np.empty(self.n_months)
            mn = np.empty(self.n_months)
            mx = np.empty(self.n_months)
            for m in range(self.n_months):
                vals = self.eod[self.day_month == m]
                if len(vals) == 0:  # unreachable: every span month holds >= 1 day
                    med[m] = mean[m] = mn[m] = mx[m] = np.nan
                    continue
                med[m] = np.median(vals)
                mean[m] = vals.mean()
                mn[m] = vals.min()
                mx[m] = vals.max()
            self._balance_stats = (med, mean, mn, mx)
        return self._balance_stats

    def od_profile(self):
        """(od day count, months with an OD day, months in a >1-day OD spell)."""
        if self._od_profile is None:
            od = self.eod < 0
            n_od_days = int(od.sum())
            months_with_day = np.zeros(self.n_months, dtype=bool)
            months_in_spell = np.zeros(self.n_months, dtype=bool)
            if n_od_days:
                months_with_day[np.unique(self.day_month[od])] = True
                edges = np.flatnonzero(np.diff(np.concatenate(([0], od.astype(np.int8), [0]))))
                for s, e in zip(edges[::2], edges[1::2]):
                    if e - s >= 2:
                        months_in_spell[np.unique(self.day_month[s:e])] = True
            self._od_profile = (n_od_days, months_with_day, months_in_spell)
        return self._od_profile

    # -- interval vectors for persistence -----------------------------------

    def half_month_vectors(self, mask: np.ndarray, amounts: bool) -> np.ndarray:
        """(n_months, 2) spend vectors split at day 15/16."""
        halves = (self.history.doms >= 16).astype(np.int64)
        idx = self.month_off[mask] * 2 + halves[mask]
        w = self.outflow_amount[mask].astype(np.float64) if amounts else None
        flat = np.bincount(idx, weights=w, minlength=self.n_months * 2)
        return flat.reshape(self.n_months, 2)

    def week_vectors(self, mask: np.ndarray, amounts: bool) -> np.ndarray:
        """(n_weeks, 7) day-of-week spend vectors over Monday-aligned weeks."""
        weeks = (self.history.days - 1) // 7
        w0 = int(weeks.min())
        n_weeks = int(weeks.max()) - w0 + 1
        dow = (self.history.days - 1) % 7
        idx = (weeks[mask] - w0) * 7 + dow[mask]
        w = self.outflow_amount[mask].astype(np.float64) if amounts else None
        flat = np.bincount(idx, weights=w, minlength=n_weeks * 7)
        return flat.reshape(n_weeks, 7)

    def spend_gaps(self, mask: np.ndarray) -> np.ndarray:
        days = self.history.days[mask]
        return np.diff(days).astype(np.float64)


# ---------------------------------------------------------------------------
# Named operations


def salary_consistency(
    history: AccountHistory, salary_flags: np.ndarray
) -> Tuple[bool, bool]:
    """(monthly, weekly) salary-cadence flags.

    Monthly is set when more than 70% of salary income lands in the best
    10-day day-of-month window (non-wrapping); weekly uses a cyclic
    3-day day-of-week window.
    """
    amounts = history.amounts[salary_flags].astype(np.float64)
    total = amounts.sum()
    if total <= 0:
        return False, False
    doms = history.doms[salary_flags].astype(np.int64)
    by_dom = np.bincount(doms, weights=amounts, minlength=32)  # slots 1..31
    best_month = max(by_dom[d : d + 10].sum() for d in range(1, 23))
    dows = ((history.days[salary_flags] - 1) % 7).astype(np.int64)
    by_dow = np.bincount(dows, weights=amounts, minlength=7)
    wrapped = np.concatenate([by_dow, by_dow[:2]])
    best_week = max(wrapped[d : d + 3].sum() for d in range(7))
    return bool(best_month / total > 0.7), bool(best_week / total > 0.7)


def disposable_income(history: AccountHistory, aggregates: HistoryAggregates = None) -> float:
    """Monthly average of income excluding loan inflows minus fixed
    expenditure minus groceries-and-housekeeping expenditure (signed pence)."""
    agg = aggregates or HistoryAggregates(history)
    income = int(agg.income_by_month.sum()) - agg.loan_inflow_total
    fixed = int(agg.fixed_by_month.sum())
    groceries = agg.category_total(Category.GROCERIES_HOUSEKEEPING)
    return (income - fixed - groceries) / agg.n_months


def distress_metrics(history: AccountHistory, aggregates: HistoryAggregates = None) -> Dict[str, float]:
    agg = aggregates or HistoryAggregates(history)
    n_od_days, _months_with_day, months_in_spell = agg.od_profile()
    months = agg.n_months
    return {
        "od_days_per_month": n_od_days / months,
        "prop_months_in_od": float(months_in_spell.sum()) / months,
        "od_fees": agg.category_total(Category.OVERDRAFT_FEE) / months,
        "rdd_per_month": int(
            (history.categories == CATEGORY_INDEX[Category.RETURNED_DIRECT_DEBITS.value]).sum()
        )
        / months,
        "dm_insolvency_spend": agg.category_total(Category.DEBT_MANAGEMENT_INSOLVENCY) / months,
        "bnpl_usage": float(agg.bnpl_mask.sum()) / months,
    }


def monthly_spend_totals(history: AccountHistory, aggregates: HistoryAggregates = None):
    """(fixed, flexible, total) integer-pence expenditure per span month."""
    agg = aggregates or HistoryAggregates(history)
    return agg.fixed_by_month, agg.flex_by_month, agg.total_by_month


# ---------------------------------------------------------------------------
# Feature registry


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    group: str
    units: str
    kind: str  # money | money_signed | count | ratio | flag | persistence | burstiness | volatility
    formula: str


def _build_registry() -> List[FeatureSpec]:
    specs: List[FeatureSpec] = []

    def add(name, group, units, kind, formula):
        specs.append(FeatureSpec(name, group, units, kind, formula))

    add("income_monthly", "inflow", "pence/month", "money", "total income inflows / span months")
    add("salary_monthly", "inflow", "pence/month", "money", "salary-flagged inflows / span months")
    add("nonsalary_income_monthly", "inflow", "pence/month", "money", "income minus salary, monthly")
    add("salary_sources", "inflow", "count", "count", "distinct references among salary inflows")
    add("salary_consistent_monthly", "inflow", "bool", "flag", ">70% of salary in one 10-day day-of-month window")
    add("salary_consistent_weekly", "inflow", "bool", "flag", ">70% of salary in one 3-day day-of-week window")

    add("spend_total_monthly", "outflow", "pence/month", "money", "fixed + flexible expenditure / span months")
    add("spend_fixed_monthly", "outflow", "pence/month", "money", "fixed-class expenditure / span months")
    add("spend_flexible_monthly", "outflow", "pence/month", "money", "flexible-class expenditure / span months")
    add("spend_txn_count_monthly", "outflow", "count/month", "count", "expenditure transactions / span months")
    add("spend_txn_amount_mean", "outflow", "pence", "money", "mean expenditure transaction amount")
    for cat in SPEND_CATEGORIES:
        add(
            f"spend_{cat.value}_monthly",
            "outflow",
            "pence/month",
            "money",
            f"{cat.value} expenditure / span months",
        )
    add("gambling_txns_monthly", "outflow", "count/month", "count", "gambling-tagged transactions / span months")
    add("gambling_in_monthly", "outflow", "pence/month", "money", "gambling-tagged inflows / span months")
    add("gambling_out_monthly", "outflow", "pence/month", "money", "gambling-tagged outflows / span months")

    for base in ("fixed", "flexible"):
        for kind in ("amount", "count"):
            for gran in ("monthly", "weekly"):
                add(
                    f"persistence_{base}_{kind}_{gran}",
                    "temporal",
                    "cosine",
                    "persistence",
                    f"mean adjacent-interval cosine of {base} {kind} vectors ({gran})",
                )
    for cat in SPEND_CATEGORIES:
        for kind in ("amount", "count"):
            add(
                f"persistence_{cat.value}_{kind}_monthly",
                "temporal",
                "cosine",
                "persistence",
                f"mean adjacent half-month cosine of {cat.value} {kind} vectors",
            )
    for base in ("all", "fixed", "flexible"):
        add(
            f"burstiness_{base}",
            "temporal",
            "dimensionless",
            "burstiness",
            f"(r-1)/(r+1) of inter-event day gaps, {base} expenditure",
        )
    for base, src in (
        ("balance", "monthly mean end-of-day balance"),
        ("income", "monthly income"),
        ("salary", "monthly salary"),
        ("fixed_spend", "monthly fixed expenditure"),
        ("flexible_spend", "monthly flexible expenditure"),
    ):
        add(
            f"volatility_{base}",
            "temporal",
            "dimensionless",
            "volatility",
            f"second-order coefficient of variation of {src}",
        )

    add("dm_insolvency_spend_monthly", "distress", "pence/month", "money", "debt-management/insolvency outflows / span months")
    add("od_days_monthly", "distress", "days/month", "count", "days with negative end-of-day balance / span months")
    add("od_months_prop", "distress", "proportion", "ratio", "months containing a >1-day negative spell / span months")
    add("od_fees_monthly", "distress", "pence/month", "money", "overdraft-fee outflows / span months")
    add("rdd_monthly", "distress", "count/month", "count", "returned direct debits / span months")
    add("bnpl_txns_monthly", "distress", "count/month", "count", "buy-now-pay-later transactions / span months")

    add("balance_mean_monthly", "resilience", "pence", "money_signed", "mean over months of mean end-of-day balance")
    add("balance_min_monthly", "resilience", "pence", "money_signed", "mean over months of minimum end-of-day balance")
    add("balance_max_monthly", "resilience", "pence", "money_signed", "mean over months of maximum end-of-day balance")
    add("disposable_income_monthly", "resilience", "pence/month", "money_signed", "income excl. loans - fixed - groceries, monthly")
    add("shock_months_prop", "resilience", "proportion", "ratio", "months whose median end-of-day balance covers a £100 shock")

    add("insurance_flag", "planning", "bool", "flag", "any insurance outflow present")
    add("insurance_spend_monthly", "planning", "pence/month", "money", "insurance outflows / span months")
    add("pension_flag", "planning", "bool", "flag", "any pension outflow present")
    add("pension_spend_monthly", "planning", "pence/month", "money", "pension outflows / span months")
    add("savings_monthly", "planning", "pence/month", "money", "savings-directed outflows / span months")

    for cat in BENEFIT_CATEGORIES:
        sub = BENEFIT_SUBTYPES[cat]
        add(f"benefit_{sub}_monthly", "aid", "pence/month", "money", f"{sub} benefit inflows / span months")
        add(f"benefit_{sub}_share", "aid", "share", "ratio", f"{sub} benefit inflows / total income")
    add("pension_income_monthly", "aid", "pence/month", "money", "pension inflows / span months")

    add("card_providers_traditional", "inclusion", "count", "count", "distinct traditional card-provider terms matched")
    add("card_providers_nontraditional", "inclusion", "count", "count", "distinct non-traditional card-provider terms matched")
    add("loan_providers_traditional", "inclusion", "count", "count", "distinct traditional loan-provider terms matched")
    add("loan_providers_nontraditional", "inclusion", "count", "count", "distinct non-traditional loan-provider terms matched")
    add("payday_flag", "inclusion", "bool", "flag", "any payday-lender term matched")
    add("card_payments_monthly", "inclusion", "pence/month", "money", "credit-card payment outflows / span months")
    add("loans_received_monthly", "inclusion", "pence/month", "money", "loan inflows / span months")
    add("loans_paid_monthly", "inclusion", "pence/month", "money", "loan outflows / span months")
    return specs


FEATURES: List[FeatureSpec] = _build_registry()
FEATURE_NAMES: List[str] = [f.name for f in FEATURES]
FEATURE_KIND: Dict[str, str] = {f.name: f.kind for f in FEATURES}


def feature_dictionary() -> List[Dict[str, str]]:
    return [
        {"name": f.name, "group": f.group, "units": f.units, "kind": f.kind, "formula": f.formula}
        for f in FEATURES
    ]


# ---------------------------------------------------------------------------
# Feature vector assembly


def build_feature_vector(
    history: AccountHistory,
    rules: KeywordRuleSet = DEFAULT_RULES,
    flow_classes: Dict[Category, FlowClass] = None,
) -> Dict[str, Optional[float]]:
    """Every registered feature for one account; None marks missing."""
    agg = HistoryAggregates(history, rules, flow_classes)
    months = agg.n_months
    out: Dict[str, Optional[float]] = {}

    income_total = int(agg.income_by_month.sum())
    salary_total = int(agg.salary_by_month.sum())
    out["income_monthly"] = income_total / months
    out["salary_monthly"] = salary_total / months
    out["nonsalary_income_monthly"] = (income_total - salary_total) / months
    sources = {
        normalize_reference(history.descriptions[i])
        for i in np.flatnonzero(agg.salary_flags)
    }
    out["salary_sources"] = float(len(sources))
    cm, cw = salary_consistency(history, agg.salary_flags)
    out["salary_consistent_monthly"] = float(cm)
    out["salary_consistent_weekly"] = float(cw)

    fixed_total = int(agg.fixed_by_month.sum())
    flex_total = int(agg.flex_by_month.sum())
    n_spend = int(agg.is_spend.sum())
    out["spend_total_monthly"] = (fixed_total + flex_total) / months
    out["spend_fixed_monthly"] = fixed_total / months
    out["spend_flexible_monthly"] = flex_total / months
    out["spend_txn_count_monthly"] = n_spend / months
    out["spend_txn_amount_mean"] = (fixed_total + flex_total) / n_spend if n_spend else None
    for cat in SPEND_CATEGORIES:
        out[f"spend_{cat.value}_monthly"] = agg.category_total(cat) / months

    g = agg.gambling_mask
    out["gambling_txns_monthly"] = float(g.sum()) / months
    out["gambling_in_monthly"] = float(agg.inflow_amount[g].sum()) / months
    out["gambling_out_monthly"] = float(agg.outflow_amount[g].sum()) / months

    for base, mask in (("fixed", agg.is_fixed_spend), ("flexible", agg.is_flex_spend)):
        for kind, amounts in (("amount", True), ("count", False)):
            out[f"persistence_{base}_{kind}_monthly"] = persistence(
                agg.half_month_vectors(mask, amounts)
            )
            out[f"persistence_{base}_{kind}_weekly"] = persistence(
                agg.week_vectors(mask, amounts)
            )
    for cat in SPEND_CATEGORIES:
        idx = CATEGORY_INDEX[cat.value]
        mask = (history.categories == idx) & (history.amounts < 0)
        for kind, amounts in (("amount", True), ("count", False)):
            out[f"persistence_{cat.value}_{kind}_monthly"] = persistence(
                agg.half_month_vectors(mask, amounts)
            )

    out["burstiness_all"] = burstiness(agg.spend_gaps(agg.is_spend))
    out["burstiness_fixed"] = burstiness(agg.spend_gaps(agg.is_fixed_spend))
    out["burstiness_flexible"] = burstiness(agg.spend_gaps(agg.is_flex_spend))

    med, mean, mn, mx = agg.balance_stats()
    out["volatility_balance"] = volatility(mean)
    out["volatility_income"] = volatility(agg.income_by_month)
    out["volatility_salary"] = volatility(agg.salary_by_month)
    out["volatility_fixed_spend"] = volatility(agg.fixed_by_month)
    out["volatility_flexible_spend"] = volatility(agg.flex_by_month)

    dm = distress_metrics(history, agg)
    out["dm_insolvency_spend_monthly"] = dm["dm_insolvency_spend"]
    out["od_days_monthly"] = dm["od_days_per_month"]
    out["od_months_prop"] = dm["prop_months_in_od"]
    out["od_fees_monthly"] = dm["od_fees"]
    out["rdd_monthly"] = dm["rdd_per_month"]
    out["bnpl_txns_monthly"] = dm["bnpl_usage"]

    out["balance_mean_monthly"] = float(mean.mean())
    out["balance_min_monthly"] = float(mn.mean())
    out["balance_max_monthly"] = float(mx.mean())
    out["disposable_income_monthly"] = disposable_income(history, agg)
    out["shock_months_prop"] = float((med >= SHOCK_PENCE).sum()) / months

    ins_total = agg.category_total(Category.INSURANCE)
    pen_total = agg.category_total(Category.PENSION)
    out["insurance_flag"] = float(ins_total > 0)
    out["insurance_spend_monthly"] = ins_total / months
    out["pension_flag"] = float(pen_total > 0)
    out["pension_spend_monthly"] = pen_total / months
    out["savings_monthly"] = sum(agg.category_total(c) for c in SAVINGS_CATEGORIES) / months

    for cat in BENEFIT_CATEGORIES:
        sub = BENEFIT_SUBTYPES[cat]
        amount = agg.category_total(cat, outflow=False)
        out[f"benefit_{sub}_monthly"] = amount / months
        if income_total > 0:
            out[f"benefit_{sub}_share"] = amount / income_total
        elif amount == 0:
            out[f"benefit_{sub}_share"] = 0.0
        else:
            out[f"benefit_{sub}_share"] = None
    out["pension_income_monthly"] = agg.category_total(Category.PENSION, outflow=False) / months

    out["card_providers_traditional"] = float(len(agg.provider_terms["traditional_card"]))
    out["card_providers_nontraditional"] = float(len(agg.provider_terms["nontraditional_card"]))
    out["loan_providers_traditional"] = float(len(agg.provider_terms["traditional_loan"]))
    out["loan_providers_nontraditional"] = float(len(agg.provider_terms["nontraditional_loan"]))
    out["payday_flag"] = float(agg.payday_any)
    out["card_payments_monthly"] = agg.category_total(Category.CREDIT_CARD_PAYMENTS) / months
    out["loans_received_monthly"] = agg.category_total(Category.LOANS, outflow=False) / months
    out["loans_paid_monthly"] = agg.category_total(Category.LOANS) / months

    return out


def validate_feature_vector(vec: Dict[str, Optional[float]]) -> List[str]:
    """Range-invariant violations, empty when the vector is well formed."""
    problems = []
    for name in FEATURE_NAMES:
        if name not in vec:
            problems.append(f"{name}: absent")
            continue
        v = vec[name]
        if v is None or (isinstance(v, float) and math.isnan(v)):
            if FEATURE_KIND[name] in ("money", "money_signed", "count", "ratio", "flag"):
                if name != "spend_txn_amount_mean" and not name.endswith("_share"):
                    problems.append(f"{name}: unexpected missing")
            continue
        kind = FEATURE_KIND[name]
        if kind in ("money", "count") and v < 0:
            problems.append(f"{name}: negative {v}")
        elif kind == "ratio" and not (0.0 <= v <= 1.0):
            problems.append(f"{name}: ratio {v} outside [0,1]")
        elif kind == "flag" and v not in (0.0, 1.0):
            problems.append(f"{name}: flag {v} not 0/1")
        elif kind == "persistence" and not (0.0 <= v <= 1.0):
            problems.append(f"{name}: persistence {v} outside [0,1]")
        elif kind == "burstiness" and not (-1.0 <= v <= 1.0):
            problems.append(f"{name}: burstiness {v} outside [-1,1]")
        elif kind == "volatility" and not (0.0 <= v < 1.0):
            problems.append(f"{name}: volatility {v} outside [0,1)")
    return problems


# ---------------------------------------------------------------------------
# Feature matrix


@dataclass
class FeatureTable:
    account_ids: List[str]
    names: List[str]
    X: np.ndarray  # float64, NaN = missing

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.names.index(name)]


def build_feature_matrix(
    histories: Iterable[AccountHistory],
    rules: KeywordRuleSet = DEFAULT_RULES,
    flow_classes: Dict[Category, FlowClass] = None,
) -> FeatureTable:
    ids: List[str] = []
    rows: List[np.ndarray] = []
    for h in histories:
        vec = build_feature_vector(h, rules, flow_classes)
        row = np.array(
            [MISSING if vec[n] is None else float(vec[n]) for n in FEATURE_NAMES],
            dtype=np.float64,
        )
        ids.append(h.account_id)
        rows.append(row)
    X = np.vstack(rows) if rows else np.zeros((0, len(FEATURE_NAMES)))
    return FeatureTable(ids, list(FEATURE_NAMES), X)


def write_features_csv(table: FeatureTable, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["account_id"] + table.names)
        for i, acc in enumerate(table.account_ids):
            row = [acc]
            for v in table.X[i]:
                row.append("" if math.isnan(v) else repr(float(v)))
            writer.writerow(row)


def read_features_csv(path: Union[str, Path]) -> FeatureTable:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        names = header[1:]
        ids = []
        rows = []
        for rec in reader:
            ids.append(rec[0])
            rows.append([float(v) if v else MISSING for v in rec[1:]])
    X = np.array(rows, dtype=np.float64) if rows else np.zeros((0, len(names)))
    return FeatureTable(ids, names, X)
