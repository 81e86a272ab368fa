"""Financial-vulnerability indicators and protected-attribute profiles.

Each indicator is a deterministic pure function of the account history
and a threshold block; thresholds default to the standard definitions
(£100 shock, £100 disposable, £100 gambling, >50% of months, 1 RDD per
month) and live in one config block so they can be tuned together.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from .features import HistoryAggregates
from .ingest import AccountHistory, GivenDemographics
from .taxonomy import CATEGORY_INDEX, Category

FVI_NAMES = [
    "shock_unable",
    "shock_never_withstand",
    "shock_always_withstand",
    "insolvent",
    "insufficient_disposable_income",
    "overdraft",
    "overdraft_never",
    "overdraft_always",
    "returned_dd",
    "gambler",
]

PROTECTED_NAMES = ["female", "disability", "carer", "has_child"]

AGE_BANDS = ((18, 25), (26, 35), (36, 45), (46, 55), (56, 200))


@dataclass(frozen=True)
class LabelThresholds:
    shock_pence: int = 10_000
    disposable_pence: int = 10_000
    gambling_pence: int = 10_000
    months_prop: float = 0.5  # "more than 50% of months", strict
    rdd_per_month: float = 1.0


@dataclass
class FviLabelSet:
    shock_unable: bool
    shock_never_withstand: bool
    shock_always_withstand: bool
    insolvent: bool
    insufficient_disposable_income: Optional[bool]
    overdraft: bool
    overdraft_never: bool
    overdraft_always: bool
    returned_dd: bool
    gambler: bool

    def as_dict(self) -> Dict[str, Optional[bool]]:
        return {name: getattr(self, name) for name in FVI_NAMES}

    def violations(self) -> List[str]:
        out = []
        if self.shock_never_withstand and not self.shock_unable:
            out.append("shock_never_withstand requires shock_unable")
        if self.shock_always_withstand and self.shock_unable:
            out.append("shock_always_withstand excludes shock_unable")
        if self.overdraft_always and not self.overdraft:
            out.append("overdraft_always requires overdraft")
        if self.overdraft_never and self.overdraft:
            out.append("overdraft_never excludes overdraft")
        return out


def label_shock(
    history: AccountHistory,
    thresholds: LabelThresholds = LabelThresholds(),
    aggregates: HistoryAggregates = None,
) -> Dict[str, bool]:
    """A month withstands the shock when its median end-of-day balance
    covers the threshold; "unable" needs failures in strictly more than
    the configured share of months."""
    agg = aggregates or HistoryAggregates(history)
    med = agg.balance_stats()[0]
    n = len(med)
    withstands = med >= thresholds.shock_pence
    n_fail = int((~withstands).sum())
    return {
        "unable": n_fail / n > thresholds.months_prop,
        "never": int(withstands.sum()) == 0,
        "always": int(withstands.sum()) == n,
    }


def label_insolvent(history: AccountHistory) -> bool:
    idx = CATEGORY_INDEX[Category.DEBT_MANAGEMENT_INSOLVENCY.value]
    return bool(((history.categories == idx) & (history.amounts < 0)).any())


def label_disposable(
    disposable_income_monthly: Optional[float],
    thresholds: LabelThresholds = LabelThresholds(),
) -> Optional[bool]:
    if disposable_income_monthly is None or (
        isinstance(disposable_income_monthly, float) and math.isnan(disposable_income_monthly)
    ):
        return None
    return disposable_income_monthly <= thresholds.disposable_pence


def label_overdraft(
    history: AccountHistory,
    thresholds: LabelThresholds = LabelThresholds(),
    aggregates: HistoryAggregates = None,
) -> Dict[str, bool]:
    """Overdraft when strictly more than the configured share of months
    contain at least one negative end-of-day balance."""
    agg = aggregates or HistoryAggregates(history)
    _days, months_with_day, _spell = agg.od_profile()
    n = agg.n_months
    n_od = int(months_with_day.sum())
    return {
        "overdraft": n_od / n > thresholds.months_prop,
        "never": n_od == 0,
        "always": n_od == n,
    }


def label_rdd(rdd_per_month: float, thresholds: LabelThresholds = LabelThresholds()) -> bool:
    return rdd_per_month >= thresholds.rdd_per_month


def label_gambler(
    gambling_out_monthly: float, thresholds: LabelThresholds = LabelThresholds()
) -> bool:
    return gambling_out_monthly >= thresholds.gambling_pence


def build_labels(
    history: AccountHistory,
    thresholds: LabelThresholds = LabelThresholds(),
    aggregates: HistoryAggregates = None,
) -> FviLabelSet:
    agg = aggregates or HistoryAggregates(history)
    months = agg.n_months
    shock = label_shock(history, thresholds, agg)
    od = label_overdraft(history, thresholds, agg)
    from .features import disposable_income  # cheap, reuses aggregates

    rdd_idx = CATEGORY_INDEX[Category.RETURNED_DIRECT_DEBITS.value]
    rdd_rate = int((history.categories == rdd_idx).sum()) / months
    gambling_out = float(agg.outflow_amount[agg.gambling_mask].sum()) / months
    return FviLabelSet(
        shock_unable=shock["unable"],
        shock_never_withstand=shock["never"],
        shock_always_withstand=shock["always"],
        insolvent=label_insolvent(history),
        insufficient_disposable_income=label_disposable(disposable_income(history, agg), thresholds),
        overdraft=od["overdraft"],
        overdraft_never=od["never"],
        overdraft_always=od["always"],
        returned_dd=label_rdd(rdd_rate, thresholds),
        gambler=label_gambler(gambling_out, thresholds),
    )


# ---------------------------------------------------------------------------
# Protected attributes

# Benefit categories whose inflows proxy each flag.  Child tax credit is
# child-conditional, so it proxies has_child alongside child benefit.
PROXY_BENEFITS = {
    "disability": (Category.BENEFIT_DISABILITY,),
    "carer": (Category.BENEFIT_CARER,),
    "has_child": (Category.BENEFIT_CHILD, Category.BENEFIT_CHILD_TAX_CREDIT),
}


@dataclass
class ProtectedProfile:
    gender: str = "other/unknown"  # female | male | other/unknown
    age: Optional[int] = None
    age_band: Optional[str] = None
    disability: bool = False
    carer: bool = False
    has_child: bool = False
    sources: Dict[str, str] = field(default_factory=dict)  # field -> given | proxy | unknown


def age_to_band(age: Optional[int]) -> Optional[str]:
    if age is None:
        return None
    for lo, hi in AGE_BANDS:
        if lo <= age <= hi:
            return f"{lo}-{hi}" if hi < 200 else f"{lo}+"
    return "under-18"


def derive_protected(
    history: AccountHistory, given: Optional[GivenDemographics] = None
) -> ProtectedProfile:
    """Flags are proxied from benefit inflows; gender and age are taken
    from supplied demographics when present, never inferred."""
    given = given if given is not None else history.given
    profile = ProtectedProfile()
    if given is not None and given.gender:
        profile.gender = given.gender
        profile.sources["gender"] = "given"
    else:
        profile.sources["gender"] = "unknown"
    if given is not None and given.age is not None:
        profile.age = given.age
        profile.age_band = age_to_band(given.age)
        profile.sources["age"] = "given"
    else:
        profile.sources["age"] = "unknown"
    for flag, cats in PROXY_BENEFITS.items():
        idxs = [CATEGORY_INDEX[c.value] for c in cats]
        hit = bool((np.isin(history.categories, idxs) & (history.amounts > 0)).any())
        setattr(profile, flag, hit)
        profile.sources[flag] = "proxy"
    return profile


# ---------------------------------------------------------------------------
# Tables and CSV round-trip


@dataclass
class LabelTable:
    account_ids: List[str]
    columns: List[str]
    values: np.ndarray  # float64 0/1 with NaN = missing

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]


def build_label_table(
    histories: Iterable[AccountHistory], thresholds: LabelThresholds = LabelThresholds()
) -> LabelTable:
    ids, rows = [], []
    for h in histories:
        labels = build_labels(h, thresholds).as_dict()
        ids.append(h.account_id)
        rows.append(
            [math.nan if labels[n] is None else float(labels[n]) for n in FVI_NAMES]
        )
    values = np.array(rows, dtype=np.float64) if rows else np.zeros((0, len(FVI_NAMES)))
    return LabelTable(ids, list(FVI_NAMES), values)


def build_protected_table(histories: Iterable[AccountHistory]) -> Tuple[LabelTable, List[ProtectedProfile]]:
    """0/1 protected columns (female, disability, carer, has_child) plus
    the full profiles; gender missing maps to NaN in the female column."""
    ids, rows, profiles = [], [], []
    for h in histories:
        p = derive_protected(h)
        profiles.append(p)
        ids.append(h.account_id)
        female = math.nan if p.gender == "other/unknown" else float(p.gender == "female")
        rows.append([female, float(p.disability), float(p.carer), float(p.has_child)])
    values = np.array(rows, dtype=np.float64) if rows else np.zeros((0, len(PROTECTED_NAMES)))
    return LabelTable(ids, list(PROTECTED_NAMES), values), profiles


def write_labels_csv(table: LabelTable, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["account_id"] + table.columns)
        for i, acc in enumerate(table.account_ids):
            row = [acc] + [
                "" if math.isnan(v) else str(int(v)) for v in table.values[i]
            ]
            writer.writerow(row)


def read_labels_csv(path: Union[str, Path]) -> LabelTable:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        columns = header[1:]
        ids, rows = [], []
        for rec in reader:
            ids.append(rec[0])
            rows.append([float(v) if v != "" else math.nan for v in rec[1:]])
    values = np.array(rows, dtype=np.float64) if rows else np.zeros((0, len(columns)))
    return LabelTable(ids, columns, values)


def write_protected_csv(
    account_ids: List[str], profiles: List[ProtectedProfile], path: Union[str, Path]
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "account_id",
                "gender",
                "age",
                "age_band",
                "disability",
                "carer",
                "has_child",
                "gender_source",
                "age_source",
                "disability_source",
                "carer_source",
                "has_child_source",
            ]
        )
        for acc, p in zip(account_ids, profiles):
            writer.writerow(
                [
                    acc,
                    p.gender,
                    "" if p.age is None else p.age,
                    p.age_band or "",
                    int(p.disability),
                    int(p.carer),
                    int(p.has_child),
                    p.sources.get("gender", "unknown"),
                    p.sources.get("age", "unknown"),
                    p.sources.get("disability", "proxy"),
                    p.sources.get("carer", "proxy"),
                    p.sources.get("has_child", "proxy"),
                ]
            )
