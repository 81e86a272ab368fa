"""Naive reference implementations used as independent oracles.

Everything here recomputes from Transaction objects with plain Python
dicts and statistics, deliberately avoiding the array code paths under
test.  Slow and simple beats fast and shared.
"""

import datetime as dt
import math
import statistics
from collections import defaultdict

from finvuln.taxonomy import (
    BENEFIT_SUBTYPES,
    Category,
    DEFAULT_FLOW_CLASSES,
    FlowClass,
)

FIXED = {c for c, f in DEFAULT_FLOW_CLASSES.items() if f == FlowClass.FIXED}
FLEXIBLE = {c for c, f in DEFAULT_FLOW_CLASSES.items() if f == FlowClass.FLEXIBLE}
INCOME = {Category.EARNINGS, Category.CREDIT_BANK_TRANSFERS, Category.PENSION, Category.LOANS} | set(
    BENEFIT_SUBTYPES
)


def month_key(d: dt.date) -> int:
    return d.year * 12 + d.month - 1


def span_months(txns) -> int:
    keys = [month_key(t.date) for t in txns]
    return max(keys) - min(keys) + 1


# -- formula oracles ---------------------------------------------------------


def persistence_oracle(vectors):
    cosines = []
    for a, b in zip(vectors[:-1], vectors[1:]):
        na = math.sqrt(sum(x * x for x in a))
        nb = math.sqrt(sum(x * x for x in b))
        if na == 0 or nb == 0:
            continue
        dot = sum(x * y for x, y in zip(a, b))
        cosines.append(min(max(dot / (na * nb), 0.0), 1.0))
    if len(vectors) < 2 or not cosines:
        return None
    return sum(cosines) / len(cosines)


def burstiness_oracle(gaps):
    if len(gaps) < 2:
        return None
    mu = statistics.fmean(gaps)
    if mu == 0:
        return None
    sigma = statistics.pstdev(gaps)
    r = sigma / mu
    return (r - 1) / (r + 1)


def volatility_oracle(values):
    if len(values) < 2:
        return None
    mu = statistics.fmean(values)
    if mu == 0:
        return None
    sigma = statistics.pstdev(values)
    ratio_sq = (sigma / mu) ** 2
    return math.sqrt(ratio_sq / (1 + ratio_sq))


# -- salary ------------------------------------------------------------------


def normalize(text):
    return " ".join(text.split()).lower()


def matches_any(desc, terms):
    d = normalize(desc)
    return any(t in d for t in terms)


def salary_flags_oracle(txns, rules):
    nonsalary_terms = list(rules.nonsalary) + list(rules.gambling)
    flags = []
    for t in txns:
        ok = (
            t.category in (Category.EARNINGS, Category.CREDIT_BANK_TRANSFERS)
            and t.amount >= 10_000
            and t.amount % 1_000 != 0
            and not matches_any(t.description, nonsalary_terms)
        )
        flags.append(ok)
    return flags


def salary_consistency_oracle(txns, flags):
    amounts = [(t, t.amount) for t, f in zip(txns, flags) if f]
    total = sum(a for _t, a in amounts)
    if total <= 0:
        return False, False
    best_m = 0.0
    for start in range(1, 23):
        share = sum(a for t, a in amounts if start <= t.date.day <= start + 9) / total
        best_m = max(best_m, share)
    best_w = 0.0
    for start in range(7):
        window = {start % 7, (start + 1) % 7, (start + 2) % 7}
        share = sum(a for t, a in amounts if t.date.weekday() in window) / total
        best_w = max(best_w, share)
    return best_m > 0.7, best_w > 0.7


# -- balances and overdraft --------------------------------------------------


def eod_oracle(txns):
    """date -> end-of-day balance over the full span, dict-based replay."""
    by_day = {}
    for t in txns:  # input is date-sorted; later transactions win
        by_day[t.date] = t.balance_after
    first = txns[0].date
    last = txns[-1].date
    out = {}
    current = None
    d = first
    while d <= last:
        if d in by_day:
            current = by_day[d]
        out[d] = current
        d += dt.timedelta(days=1)
    return out


def month_medians_oracle(txns):
    eod = eod_oracle(txns)
    per_month = defaultdict(list)
    for d, bal in eod.items():
        per_month[month_key(d)].append(bal)
    return {mk: statistics.median(v) for mk, v in per_month.items()}


def od_months_oracle(txns):
    """(months with >=1 negative day, months touched by a >1-day spell)."""
    eod = eod_oracle(txns)
    days = sorted(eod)
    with_day = set()
    in_spell = set()
    run = []
    for d in days + [None]:
        if d is not None and eod[d] < 0:
            with_day.add(month_key(d))
            run.append(d)
            continue
        if len(run) >= 2:
            for rd in run:
                in_spell.add(month_key(rd))
        run = []
    return with_day, in_spell


# -- labels ------------------------------------------------------------------


def labels_oracle(txns, shock=10_000, disposable=10_000, gambling=10_000, rdd_rate=1.0, rules=None):
    from finvuln.rules import DEFAULT_RULES

    rules = rules or DEFAULT_RULES
    months = span_months(txns)
    medians = month_medians_oracle(txns)
    n_fail = sum(1 for v in medians.values() if v < shock)
    n_with = len(medians) - n_fail
    with_day, _spell = od_months_oracle(txns)

    income = sum(t.amount for t in txns if t.amount > 0 and t.category in INCOME)
    loans_in = sum(t.amount for t in txns if t.amount > 0 and t.category == Category.LOANS)
    fixed = sum(-t.amount for t in txns if t.amount < 0 and t.category in FIXED)
    groceries = sum(
        -t.amount for t in txns if t.amount < 0 and t.category == Category.GROCERIES_HOUSEKEEPING
    )
    disp = (income - loans_in - fixed - groceries) / months

    gambling_out = sum(
        -t.amount
        for t in txns
        if t.amount < 0
        and (t.category == Category.GAMBLING or matches_any(t.description, rules.gambling))
    )
    rdd_count = sum(1 for t in txns if t.category == Category.RETURNED_DIRECT_DEBITS)
    return {
        "shock_unable": n_fail / months > 0.5,
        "shock_never_withstand": n_with == 0,
        "shock_always_withstand": n_with == months,
        "insolvent": any(
            t.amount < 0 and t.category == Category.DEBT_MANAGEMENT_INSOLVENCY for t in txns
        ),
        "insufficient_disposable_income": disp <= disposable,
        "overdraft": len(with_day) / months > 0.5,
        "overdraft_never": len(with_day) == 0,
        "overdraft_always": len(with_day) == months,
        "returned_dd": rdd_count / months >= rdd_rate,
        "gambler": gambling_out / months >= gambling,
    }


# -- metrics -----------------------------------------------------------------


def auroc_oracle(labels, scores):
    pos = [s for y, s in zip(labels, scores) if y == 1]
    neg = [s for y, s in zip(labels, scores) if y == 0]
    if not pos or not neg:
        return None
    credit = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                credit += 1.0
            elif p == n:
                credit += 0.5
    return credit / (len(pos) * len(neg))


def pearson_oracle(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    if sxx == 0 or syy == 0:
        return None
    return sxy / math.sqrt(sxx * syy)


# -- full feature vector -----------------------------------------------------

SPEND_CATS = [
    Category.CASH, Category.CHARITY_DONATION, Category.CHILD_SCHOOL,
    Category.EATING_OUT_TAKEAWAYS, Category.FASHION_BEAUTY, Category.FUN_LEISURE,
    Category.GROCERIES_HOUSEKEEPING, Category.HEALTH_FITNESS, Category.HOUSING,
    Category.MEDICAL_HEALTH, Category.SUBSCRIPTIONS, Category.TRANSPORT_FUEL,
    Category.UTILITIES,
]


def _half_month_vectors(txns, pick, months_range, weight):
    vecs = []
    for mk in months_range:
        lo = sum(weight(t) for t in txns if pick(t) and month_key(t.date) == mk and t.date.day <= 15)
        hi = sum(weight(t) for t in txns if pick(t) and month_key(t.date) == mk and t.date.day >= 16)
        vecs.append((lo, hi))
    return vecs


def _week_vectors(txns, pick, weight):
    week = lambda d: (d.toordinal() - 1) // 7
    w0 = min(week(t.date) for t in txns)
    w1 = max(week(t.date) for t in txns)
    vecs = []
    for w in range(w0, w1 + 1):
        vec = [0.0] * 7
        for t in txns:
            if pick(t) and week(t.date) == w:
                vec[t.date.weekday()] += weight(t)
        vecs.append(tuple(vec))
    return vecs


def feature_vector_oracle(txns, rules=None):
    """All 108 features, recomputed transaction by transaction."""
    from finvuln.rules import DEFAULT_RULES

    rules = rules or DEFAULT_RULES
    months = span_months(txns)
    mk0 = min(month_key(t.date) for t in txns)
    months_range = range(mk0, mk0 + months)
    out = {}

    flags = salary_flags_oracle(txns, rules)
    income = sum(t.amount for t in txns if t.amount > 0 and t.category in INCOME)
    salary = sum(t.amount for t, f in zip(txns, flags) if f)
    out["income_monthly"] = income / months
    out["salary_monthly"] = salary / months
    out["nonsalary_income_monthly"] = (income - salary) / months
    out["salary_sources"] = float(len({normalize(t.description) for t, f in zip(txns, flags) if f}))
    cm, cw = salary_consistency_oracle(txns, flags)
    out["salary_consistent_monthly"] = float(cm)
    out["salary_consistent_weekly"] = float(cw)

    is_fixed = lambda t: t.amount < 0 and t.category in FIXED
    is_flex = lambda t: t.amount < 0 and t.category in FLEXIBLE
    is_spend = lambda t: is_fixed(t) or is_flex(t)
    fixed_total = sum(-t.amount for t in txns if is_fixed(t))
    flex_total = sum(-t.amount for t in txns if is_flex(t))
    n_spend = sum(1 for t in txns if is_spend(t))
    out["spend_total_monthly"] = (fixed_total + flex_total) / months
    out["spend_fixed_monthly"] = fixed_total / months
    out["spend_flexible_monthly"] = flex_total / months
    out["spend_txn_count_monthly"] = n_spend / months
    out["spend_txn_amount_mean"] = (fixed_total + flex_total) / n_spend if n_spend else None
    for cat in SPEND_CATS:
        spent = sum(-t.amount for t in txns if t.amount < 0 and t.category == cat)
        out[f"spend_{cat.value}_monthly"] = spent / months

    is_gambling = lambda t: t.category == Category.GAMBLING or matches_any(t.description, rules.gambling)
    out["gambling_txns_monthly"] = sum(1 for t in txns if is_gambling(t)) / months
    out["gambling_in_monthly"] = sum(t.amount for t in txns if is_gambling(t) and t.amount > 0) / months
    out["gambling_out_monthly"] = sum(-t.amount for t in txns if is_gambling(t) and t.amount < 0) / months

    amount_w = lambda t: float(-t.amount)
    count_w = lambda t: 1.0
    for base, pick in (("fixed", is_fixed), ("flexible", is_flex)):
        for kind, w in (("amount", amount_w), ("count", count_w)):
            out[f"persistence_{base}_{kind}_monthly"] = persistence_oracle(
                _half_month_vectors(txns, pick, months_range, w)
            )
            out[f"persistence_{base}_{kind}_weekly"] = persistence_oracle(
                _week_vectors(txns, pick, w)
            )
    for cat in SPEND_CATS:
        pick = lambda t, c=cat: t.amount < 0 and t.category == c
        for kind, w in (("amount", amount_w), ("count", count_w)):
            out[f"persistence_{cat.value}_{kind}_monthly"] = persistence_oracle(
                _half_month_vectors(txns, pick, months_range, w)
            )

    for base, pick in (("all", is_spend), ("fixed", is_fixed), ("flexible", is_flex)):
        days = [t.date.toordinal() for t in txns if pick(t)]
        gaps = [b - a for a, b in zip(days[:-1], days[1:])]
        out[f"burstiness_{base}"] = burstiness_oracle(gaps)

    eod = eod_oracle(txns)
    per_month = defaultdict(list)
    for d, bal in eod.items():
        per_month[month_key(d)].append(bal)
    month_means = [statistics.fmean(per_month[mk]) for mk in sorted(per_month)]
    monthly_series = lambda pick, signed=False: [
        sum((t.amount if signed else -t.amount) for t in txns if pick(t) and month_key(t.date) == mk)
        for mk in months_range
    ]
    out["volatility_balance"] = volatility_oracle(month_means)
    out["volatility_income"] = volatility_oracle(
        [sum(t.amount for t in txns if t.amount > 0 and t.category in INCOME and month_key(t.date) == mk) for mk in months_range]
    )
    out["volatility_salary"] = volatility_oracle(
        [sum(t.amount for t, f in zip(txns, flags) if f and month_key(t.date) == mk) for mk in months_range]
    )
    out["volatility_fixed_spend"] = volatility_oracle(monthly_series(is_fixed))
    out["volatility_flexible_spend"] = volatility_oracle(monthly_series(is_flex))

    with_day, in_spell = od_months_oracle(txns)
    n_od_days = sum(1 for bal in eod.values() if bal < 0)
    out["dm_insolvency_spend_monthly"] = sum(
        -t.amount for t in txns if t.amount < 0 and t.category == Category.DEBT_MANAGEMENT_INSOLVENCY
    ) / months
    out["od_days_monthly"] = n_od_days / months
    out["od_months_prop"] = len(in_spell) / months
    out["od_fees_monthly"] = sum(
        -t.amount for t in txns if t.amount < 0 and t.category == Category.OVERDRAFT_FEE
    ) / months
    out["rdd_monthly"] = sum(1 for t in txns if t.category == Category.RETURNED_DIRECT_DEBITS) / months
    out["bnpl_txns_monthly"] = sum(1 for t in txns if matches_any(t.description, rules.bnpl)) / months

    out["balance_mean_monthly"] = statistics.fmean(month_means)
    out["balance_min_monthly"] = statistics.fmean([min(per_month[mk]) for mk in sorted(per_month)])
    out["balance_max_monthly"] = statistics.fmean([max(per_month[mk]) for mk in sorted(per_month)])
    loans_in = sum(t.amount for t in txns if t.amount > 0 and t.category == Category.LOANS)
    groceries = sum(
        -t.amount for t in txns if t.amount < 0 and t.category == Category.GROCERIES_HOUSEKEEPING
    )
    out["disposable_income_monthly"] = (income - loans_in - fixed_total - groceries) / months
    medians = month_medians_oracle(txns)
    out["shock_months_prop"] = sum(1 for v in medians.values() if v >= 10_000) / months

    ins = sum(-t.amount for t in txns if t.amount < 0 and t.category == Category.INSURANCE)
    pen = sum(-t.amount for t in txns if t.amount < 0 and t.category == Category.PENSION)
    out["insurance_flag"] = float(ins > 0)
    out["insurance_spend_monthly"] = ins / months
    out["pension_flag"] = float(pen > 0)
    out["pension_spend_monthly"] = pen / months
    out["savings_monthly"] = sum(
        -t.amount
        for t in txns
        if t.amount < 0 and t.category in (Category.DEBIT_INTERNAL_TRANSFERS, Category.SAVINGS_INVESTMENTS)
    ) / months

    for cat, sub in BENEFIT_SUBTYPES.items():
        amount = sum(t.amount for t in txns if t.amount > 0 and t.category == cat)
        out[f"benefit_{sub}_monthly"] = amount / months
        if income > 0:
            out[f"benefit_{sub}_share"] = amount / income
        elif amount == 0:
            out[f"benefit_{sub}_share"] = 0.0
        else:
            out[f"benefit_{sub}_share"] = None
    out["pension_income_monthly"] = sum(
        t.amount for t in txns if t.amount > 0 and t.category == Category.PENSION
    ) / months

    def matched_terms(terms):
        found = set()
        for t in txns:
            d = normalize(t.description)
            for term in terms:
                if term in d:
                    found.add(term)
        return found

    out["card_providers_traditional"] = float(len(matched_terms(rules.traditional_card)))
    out["card_providers_nontraditional"] = float(len(matched_terms(rules.nontraditional_card)))
    out["loan_providers_traditional"] = float(len(matched_terms(rules.traditional_loan)))
    out["loan_providers_nontraditional"] = float(len(matched_terms(rules.nontraditional_loan)))
    out["payday_flag"] = float(len(matched_terms(rules.payday)) > 0)
    out["card_payments_monthly"] = sum(
        -t.amount for t in txns if t.amount < 0 and t.category == Category.CREDIT_CARD_PAYMENTS
    ) / months
    out["loans_received_monthly"] = loans_in / months
    out["loans_paid_monthly"] = sum(
        -t.amount for t in txns if t.amount < 0 and t.category == Category.LOANS
    ) / months
    return out
