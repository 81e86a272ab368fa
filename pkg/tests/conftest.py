import numpy as np
import pytest

from finvuln.ingest import Transaction, history_from_transactions
from finvuln.synthgen import CohortConfig, generate_cohort
from finvuln.taxonomy import Category

import datetime as dt


@pytest.fixture(scope="session")
def small_cohort():
    """200 accounts, 8 months, shared across tests that only read it."""
    return generate_cohort(CohortConfig(n_accounts=200, months_per_account=8, seed=42))


@pytest.fixture(scope="session")
def mid_cohort():
    """600 accounts, 12 months: enough signal for learn/segment checks."""
    return generate_cohort(CohortConfig(n_accounts=600, months_per_account=12, seed=7))


def make_history(rows, account_id="T1"):
    """rows: (date string, amount pence, category, description[, balance])."""
    txns = []
    balance = 0
    for row in rows:
        date_s, amount, cat, desc = row[:4]
        if len(row) > 4:
            balance = row[4]
        else:
            balance += amount
        txns.append(
            Transaction(
                account_id=account_id,
                date=dt.date.fromisoformat(date_s),
                amount=amount,
                description=desc,
                category=cat if isinstance(cat, Category) else Category(cat),
                balance_after=balance,
            )
        )
    return history_from_transactions(account_id, txns)


def random_history(rng, months=8, start="2021-01-01", account_id="R1", txns_per_month=(3, 18)):
    """A random but structurally valid history for oracle comparisons."""
    cats = list(Category)
    start_date = dt.date.fromisoformat(start)
    rows = []
    balance = int(rng.integers(-50_000, 200_000))
    mk0 = start_date.year * 12 + start_date.month - 1
    for m in range(months):
        mk = mk0 + m
        year, month = mk // 12, mk % 12 + 1
        if month == 12:
            mlen = 31
        else:
            mlen = (dt.date(year, month + 1, 1) - dt.date(year, month, 1)).days
        n_txns = int(rng.integers(txns_per_month[0], txns_per_month[1] + 1))
        days = sorted(int(rng.integers(1, mlen + 1)) for _ in range(n_txns))
        for day in days:
            amount = int(rng.integers(-80_000, 80_000))
            if amount == 0:
                amount = 137
            cat = cats[int(rng.integers(len(cats)))]
            balance += amount
            desc_pool = [
                "TESCO STORES",
                "BET365 DEPOSIT",
                "ACME LTD PAYROLL",
                "KLARNA PAYMENT",
                "DD RETURNED",
                "MISC PAYMENT REF 81",
                "BARCLAYCARD PAYMENT",
            ]
            desc = desc_pool[int(rng.integers(len(desc_pool)))]
            rows.append(
                Transaction(
                    account_id=account_id,
                    date=dt.date(year, month, day),
                    amount=amount,
                    description=desc,
                    category=cat,
                    balance_after=balance,
                )
            )
    return history_from_transactions(account_id, rows)
