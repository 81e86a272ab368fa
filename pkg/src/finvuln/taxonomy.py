"""Canonical transaction category taxonomy.

The taxonomy is closed: every transaction carries exactly one category
code, and every code maps to exactly one flow class.  Flow classes drive
the expenditure aggregations:

  fixed / flexible  outflow categories counted as expenditure
  inflow            income-side categories
  transfer          money movement, neither income nor expenditure
  excluded          bookkeeping noise (reversals, refunds)

The fixed/flexible assignment is an editable table: pass a mapping file
to :func:`load_flow_classes` to override the defaults below.
"""

from __future__ import annotations

import csv
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, TextIO, Union


class FlowClass(str, Enum):
    FIXED = "fixed"
    FLEXIBLE = "flexible"
    INFLOW = "inflow"
    TRANSFER = "transfer"
    EXCLUDED = "excluded"


class Category(str, Enum):
    EARNINGS = "earnings"
    CREDIT_BANK_TRANSFERS = "credit_bank_transfers"
    INTERNAL_TRANSFERS = "internal_transfers"
    DEBIT_INTERNAL_TRANSFERS = "debit_internal_transfers"
    RETURNED_DIRECT_DEBITS = "returned_direct_debits"
    RETURNS = "returns"
    DEBT_MANAGEMENT_INSOLVENCY = "debt_management_insolvency"
    SAVINGS_INVESTMENTS = "savings_investments"
    CASH = "cash"
    CHARITY_DONATION = "charity_donation"
    CHILD_SCHOOL = "child_school"
    EATING_OUT_TAKEAWAYS = "eating_out_takeaways"
    FASHION_BEAUTY = "fashion_beauty"
    FUN_LEISURE = "fun_leisure"
    GROCERIES_HOUSEKEEPING = "groceries_housekeeping"
    HEALTH_FITNESS = "health_fitness"
    HOUSING = "housing"
    MEDICAL_HEALTH = "medical_health"
    SUBSCRIPTIONS = "subscriptions"
    TRANSPORT_FUEL = "transport_fuel"
    UTILITIES = "utilities"
    GAMBLING = "gambling"
    INSURANCE = "insurance"
    PENSION = "pension"
    LOANS = "loans"
    CREDIT_CARD_PAYMENTS = "credit_card_payments"
    OVERDRAFT_FEE = "overdraft_fee"
    BENEFIT_DISABILITY = "benefit_disability"
    BENEFIT_CARER = "benefit_carer"
    BENEFIT_CHILD = "benefit_child"
    BENEFIT_CHILD_TAX_CREDIT = "benefit_child_tax_credit"
    BENEFIT_WORKING_TAX_CREDIT = "benefit_working_tax_credit"
    BENEFIT_UNIVERSAL_CREDIT = "benefit_universal_credit"
    BENEFIT_EMPLOYMENT_SUPPORT = "benefit_employment_support"


CATEGORIES = tuple(Category)
CATEGORY_INDEX: Dict[str, int] = {c.value: i for i, c in enumerate(CATEGORIES)}
N_CATEGORIES = len(CATEGORIES)

BENEFIT_SUBTYPES: Dict[Category, str] = {
    Category.BENEFIT_DISABILITY: "disability",
    Category.BENEFIT_CARER: "carer",
    Category.BENEFIT_CHILD: "child",
    Category.BENEFIT_CHILD_TAX_CREDIT: "child_tax_credit",
    Category.BENEFIT_WORKING_TAX_CREDIT: "working_tax_credit",
    Category.BENEFIT_UNIVERSAL_CREDIT: "universal_credit",
    Category.BENEFIT_EMPLOYMENT_SUPPORT: "employment_support",
}
BENEFIT_CATEGORIES = tuple(BENEFIT_SUBTYPES)

# Categories whose positive-amount transactions count toward total income.
# Internal transfers, returned direct debits and returns never do.
INCOME_CATEGORIES = (
    Category.EARNINGS,
    Category.CREDIT_BANK_TRANSFERS,
    Category.PENSION,
    Category.LOANS,
) + BENEFIT_CATEGORIES

# Only these categories can host salary inflows.
SALARY_CANDIDATE_CATEGORIES = (Category.EARNINGS, Category.CREDIT_BANK_TRANSFERS)

# Outflows in these categories count as money put toward savings.
SAVINGS_CATEGORIES = (Category.DEBIT_INTERNAL_TRANSFERS, Category.SAVINGS_INVESTMENTS)

# The thirteen per-category monthly spend features.
SPEND_CATEGORIES = (
    Category.CASH,
    Category.CHARITY_DONATION,
    Category.CHILD_SCHOOL,
    Category.EATING_OUT_TAKEAWAYS,
    Category.FASHION_BEAUTY,
    Category.FUN_LEISURE,
    Category.GROCERIES_HOUSEKEEPING,
    Category.HEALTH_FITNESS,
    Category.HOUSING,
    Category.MEDICAL_HEALTH,
    Category.SUBSCRIPTIONS,
    Category.TRANSPORT_FUEL,
    Category.UTILITIES,
)

_FIXED = {
    Category.HOUSING,
    Category.UTILITIES,
    Category.INSURANCE,
    Category.PENSION,
    Category.SUBSCRIPTIONS,
    Category.LOANS,
    Category.CREDIT_CARD_PAYMENTS,
    Category.CHILD_SCHOOL,
    Category.TRANSPORT_FUEL,
}
_INFLOW = {Category.EARNINGS, Category.CREDIT_BANK_TRANSFERS, *BENEFIT_CATEGORIES}
_TRANSFER = {
    Category.INTERNAL_TRANSFERS,
    Category.DEBIT_INTERNAL_TRANSFERS,
    Category.SAVINGS_INVESTMENTS,
}
_EXCLUDED = {Category.RETURNED_DIRECT_DEBITS, Category.RETURNS}


def _default_flow_classes() -> Dict[Category, FlowClass]:
    out = {}
    for cat in CATEGORIES:
        if cat in _FIXED:
            out[cat] = FlowClass.FIXED
        elif cat in _INFLOW:
            out[cat] = FlowClass.INFLOW
        elif cat in _TRANSFER:
            out[cat] = FlowClass.TRANSFER
        elif cat in _EXCLUDED:
            out[cat] = FlowClass.EXCLUDED
        else:
            out[cat] = FlowClass.FLEXIBLE
    return out


DEFAULT_FLOW_CLASSES: Dict[Category, FlowClass] = _default_flow_classes()


def flow_class_array(flow_classes: Dict[Category, FlowClass] = None):
    """Flow class per category index, as a list aligned with CATEGORIES."""
    fc = flow_classes or DEFAULT_FLOW_CLASSES
    return [fc[c] for c in CATEGORIES]


def load_flow_classes(source: Union[str, Path, TextIO]) -> Dict[Category, FlowClass]:
    """Load a category -> flow class table from a two-column CSV.

    Missing categories keep their default class; unknown category or
    flow-class names raise ValueError (the taxonomy is closed).
    """
    close = False
    if isinstance(source, (str, Path)):
        source = open(source, "r", encoding="utf-8", newline="")
        close = True
    try:
        table = dict(DEFAULT_FLOW_CLASSES)
        reader = csv.reader(source)
        for row in reader:
            if not row or row[0].startswith("#"):
                continue
            if row[0] == "category":  # header
                continue
            if len(row) != 2:
                raise ValueError(f"flow-class table row must have 2 columns: {row!r}")
            name, klass = row[0].strip(), row[1].strip()
            if name not in CATEGORY_INDEX:
                raise ValueError(f"unknown category {name!r} in flow-class table")
            try:
                table[Category(name)] = FlowClass(klass)
            except ValueError:
                raise ValueError(f"unknown flow class {klass!r} for category {name!r}")
        return table
    finally:
        if close:
            source.close()


def write_flow_classes(path: Union[str, Path], flow_classes: Dict[Category, FlowClass] = None) -> None:
    fc = flow_classes or DEFAULT_FLOW_CLASSES
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["category", "flow_class"])
        for cat in CATEGORIES:
            writer.writerow([cat.value, fc[cat].value])


def validate_flow_classes(flow_classes: Dict[Category, FlowClass]) -> None:
    missing = [c.value for c in CATEGORIES if c not in flow_classes]
    if missing:
        raise ValueError(f"flow-class table missing categories: {missing}")
