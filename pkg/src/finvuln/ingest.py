"""Parse, validate and organize raw transaction files.

The canonical CSV schema (header required, UTF-8):

    account_id,date,amount_pence,description,category,balance_pence

with ISO dates and signed integer pence.  A JSONL mirror uses the same
field names.  Amounts are kept in integer pence throughout to avoid
float drift in sums; zero-amount rows are rejected, as are rows with an
unknown category (the taxonomy is closed).
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .rules import KeywordRuleSet, DEFAULT_RULES
from .taxonomy import (
    CATEGORIES,
    CATEGORY_INDEX,
    Category,
    SALARY_CANDIDATE_CATEGORIES,
)

CSV_HEADER = ["account_id", "date", "amount_pence", "description", "category", "balance_pence"]

SALARY_MIN_PENCE = 10_000  # inflows under £100 are small transfers, not salary
ROUND_TEN_PENCE = 1_000  # exact multiples of £10 are excluded from salary


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class Transaction:
    account_id: str
    date: dt.date
    amount: int  # signed pence, negative = outflow
    description: str
    category: Category
    balance_after: int  # signed pence

    def __post_init__(self):
        if self.amount == 0:
            raise ValueError("transaction amount must be non-zero")


@dataclass(frozen=True)
class Rejection:
    line: int
    reason: str


@dataclass
class GivenDemographics:
    gender: Optional[str] = None  # female | male | other/unknown
    age: Optional[int] = None
    residential_status: Optional[str] = None
    employment_length: Optional[float] = None


@dataclass
class AccountHistory:
    """Date-ordered transactions of one account, stored as columns.

    Transactions are sorted ascending by date with ties broken by file
    order.  ``days`` holds proleptic-Gregorian ordinals; ``month_keys``
    holds year*12 + (month-1) so consecutive months differ by one.
    """

    account_id: str
    days: np.ndarray  # int32 ordinals
    month_keys: np.ndarray  # int32
    doms: np.ndarray  # int8 day of month (1-31)
    amounts: np.ndarray  # int64 signed pence
    categories: np.ndarray  # int16 index into CATEGORIES
    balances: np.ndarray  # int64 signed pence after each transaction
    descriptions: List[str]
    given: Optional[GivenDemographics] = None

    def __len__(self) -> int:
        return len(self.amounts)

    @property
    def span_months(self) -> int:
        """Distinct calendar months covered, first to last transaction."""
        if len(self.month_keys) == 0:
            return 0
        return int(self.month_keys[-1] - self.month_keys[0] + 1)

    def monthly_txn_counts(self) -> np.ndarray:
        """Transactions per calendar month across the full span (gaps count 0)."""
        if len(self) == 0:
            return np.zeros(0, dtype=np.int64)
        offsets = self.month_keys - self.month_keys[0]
        return np.bincount(offsets, minlength=self.span_months)

    def weekdays(self) -> np.ndarray:
        return (self.days - 1) % 7  # ordinal 1 is a Monday

    def transactions(self) -> Iterator[Transaction]:
        for i in range(len(self)):
            yield Transaction(
                account_id=self.account_id,
                date=dt.date.fromordinal(int(self.days[i])),
                amount=int(self.amounts[i]),
                description=self.descriptions[i],
                category=CATEGORIES[self.categories[i]],
                balance_after=int(self.balances[i]),
            )


def _month_key(d: dt.date) -> int:
    return d.year * 12 + d.month - 1


def history_from_transactions(
    account_id: str,
    txns: Sequence[Transaction],
    given: Optional[GivenDemographics] = None,
) -> AccountHistory:
    order = sorted(range(len(txns)), key=lambda i: txns[i].date)  # stable: file order breaks ties
    days = np.array([txns[i].date.toordinal() for i in order], dtype=np.int32)
    month_keys = np.array([_month_key(txns[i].date) for i in order], dtype=np.int32)
    doms = np.array([txns[i].date.day for i in order], dtype=np.int8)
    amounts = np.array([txns[i].amount for i in order], dtype=np.int64)
    categories = np.array([CATEGORY_INDEX[txns[i].category.value] for i in order], dtype=np.int16)
    balances = np.array([txns[i].balance_after for i in order], dtype=np.int64)
    descriptions = [txns[i].description for i in order]
    return AccountHistory(
        account_id=account_id,
        days=days,
        month_keys=month_keys,
        doms=doms,
        amounts=amounts,
        categories=categories,
        balances=balances,
        descriptions=descriptions,
        given=given,
    )


def _parse_row(fields: Sequence[str], line: int) -> Union[Transaction, Rejection]:
    if len(fields) != 6:
        return Rejection(line, f"expected 6 fields, got {len(fields)}")
    account_id, date_s, amount_s, description, category_s, balance_s = fields
    if not account_id:
        return Rejection(line, "empty account_id")
    try:
        date = dt.date.fromisoformat(date_s)
    except ValueError:
        return Rejection(line, "invalid date")
    try:
        amount = int(amount_s)
    except ValueError:
        return Rejection(line, "invalid amount")
    if amount == 0:
        return Rejection(line, "zero amount")
    if category_s not in CATEGORY_INDEX:
        return Rejection(line, f"unknown category {category_s!r}")
    try:
        balance = int(balance_s)
    except ValueError:
        return Rejection(line, "invalid balance")
    return Transaction(account_id, date, amount, description, Category(category_s), balance)


def _open_text(source: Union[str, Path, BinaryIO, io.TextIOBase]) -> Tuple[io.TextIOBase, bool]:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline=""), True
    if isinstance(source, io.TextIOBase):
        return source, False
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), False


def parse_transactions(
    source: Union[str, Path, BinaryIO, io.TextIOBase],
    fmt: str = "csv",
) -> Tuple[List[Transaction], List[Rejection]]:
    """Parse a transaction file; malformed rows become rejection records.

    Raises IngestError on an empty file or (CSV) a bad header.
    """
    if fmt not in ("csv", "jsonl"):
        raise IngestError(f"unknown format {fmt!r}")
    fh, close = _open_text(source)
    try:
        if fmt == "csv":
            return _parse_csv(fh)
        return _parse_jsonl(fh)
    finally:
        if close:
            fh.close()


def _parse_csv(fh) -> Tuple[List[Transaction], List[Rejection]]:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError("empty file")
    if header != CSV_HEADER:
        raise IngestError(f"bad header {header!r}, expected {CSV_HEADER!r}")
    txns: List[Transaction] = []
    rejections: List[Rejection] = []
    for line, fields in enumerate(reader, start=2):
        if not fields:
            continue
        parsed = _parse_row(fields, line)
        if isinstance(parsed, Rejection):
            rejections.append(parsed)
        else:
            txns.append(parsed)
    if not txns and not rejections:
        raise IngestError("empty file")
    return txns, rejections


def _parse_jsonl(fh) -> Tuple[List[Transaction], List[Rejection]]:
    txns: List[Transaction] = []
    rejections: List[Rejection] = []
    any_line = False
    for line, raw in enumerate(fh, start=1):
        if not raw.strip():
            continue
        any_line = True
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError:
            rejections.append(Rejection(line, "invalid json"))
            continue
        fields = [
            str(obj.get("account_id", "")),
            str(obj.get("date", "")),
            str(obj.get("amount_pence", "")),
            str(obj.get("description", "")),
            str(obj.get("category", "")),
            str(obj.get("balance_pence", "")),
        ]
        parsed = _parse_row(fields, line)
        if isinstance(parsed, Rejection):
            rejections.append(parsed)
        else:
            txns.append(parsed)
    if not any_line:
        raise IngestError("empty file")
    return txns, rejections


def write_transactions_csv(txns: Iterable[Transaction], target: Union[str, Path, io.TextIOBase]) -> None:
    """Serialize to the canonical CSV form (round-trips bit-identically)."""
    fh, close = (open(target, "w", encoding="utf-8", newline=""), True) if isinstance(
        target, (str, Path)
    ) else (target, False)
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for t in txns:
            writer.writerow(
                [t.account_id, t.date.isoformat(), t.amount, t.description, t.category.value, t.balance_after]
            )
    finally:
        if close:
            fh.close()


def write_transactions_jsonl(txns: Iterable[Transaction], target: Union[str, Path, io.TextIOBase]) -> None:
    fh, close = (open(target, "w", encoding="utf-8", newline=""), True) if isinstance(
        target, (str, Path)
    ) else (target, False)
    try:
        for t in txns:
            fh.write(
                json.dumps(
                    {
                        "account_id": t.account_id,
                        "date": t.date.isoformat(),
                        "amount_pence": t.amount,
                        "description": t.description,
                        "category": t.category.value,
                        "balance_pence": t.balance_after,
                    },
                    separators=(",", ":"),
                )
                + "\n"
            )
    finally:
        if close:
            fh.close()


def group_histories(
    txns: Sequence[Transaction],
    demographics: Optional[Dict[str, GivenDemographics]] = None,
) -> List[AccountHistory]:
    """Group parsed transactions into per-account histories.

    Accounts appear in order of first occurrence in the file.
    """
    by_account: Dict[str, List[Transaction]] = {}
    for t in txns:
        by_account.setdefault(t.account_id, []).append(t)
    demographics = demographics or {}
    return [
        history_from_transactions(acc, ts, demographics.get(acc))
        for acc, ts in by_account.items()
    ]


def iter_account_rows(path: Union[str, Path]) -> Iterator[Tuple[str, List[Transaction], List[Rejection]]]:
    """Stream per-account transaction blocks from an account-grouped CSV.

    Holds one account in memory at a time; requires rows of the same
    account to be contiguous (the canonical writers emit them that way).
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError("empty file")
        if header != CSV_HEADER:
            raise IngestError(f"bad header {header!r}, expected {CSV_HEADER!r}")
        seen = set()
        current: Optional[str] = None
        txns: List[Transaction] = []
        rejections: List[Rejection] = []
        for line, fields in enumerate(reader, start=2):
            if not fields:
                continue
            parsed = _parse_row(fields, line)
            if isinstance(parsed, Rejection):
                rejections.append(parsed)
                continue
            if parsed.account_id != current:
                if current is not None:
                    yield current, txns, rejections
                    rejections = []
                if parsed.account_id in seen:
                    raise IngestError(
                        f"line {line}: account {parsed.account_id!r} not contiguous; "
                        "run the ingest stage to produce a grouped file"
                    )
                current = parsed.account_id
                seen.add(current)
                txns = []
            txns.append(parsed)
        if current is not None:
            yield current, txns, rejections


@dataclass(frozen=True)
class EligibilityRecord:
    account_id: str
    span_months: int
    min_monthly_txns: int
    eligible: bool
    reason: str


def check_eligibility(history: AccountHistory, min_months: int = 6, min_txns: int = 10) -> EligibilityRecord:
    span = history.span_months
    counts = history.monthly_txn_counts()
    min_count = int(counts.min()) if len(counts) else 0
    if span < min_months:
        return EligibilityRecord(history.account_id, span, min_count, False, f"span {span} months < {min_months}")
    if min_count < min_txns:
        return EligibilityRecord(
            history.account_id, span, min_count, False, f"a month has {min_count} transactions < {min_txns}"
        )
    return EligibilityRecord(history.account_id, span, min_count, True, "")


def filter_eligible(
    histories: Iterable[AccountHistory], min_months: int = 6, min_txns: int = 10
) -> Tuple[List[AccountHistory], List[EligibilityRecord]]:
    """Retain accounts with >= min_months distinct months and >= min_txns
    transactions in every month of the span."""
    kept: List[AccountHistory] = []
    report: List[EligibilityRecord] = []
    for h in histories:
        rec = check_eligibility(h, min_months, min_txns)
        report.append(rec)
        if rec.eligible:
            kept.append(h)
    return kept, report


def detect_salary_inflows(history: AccountHistory, rules: KeywordRuleSet = DEFAULT_RULES) -> np.ndarray:
    """Boolean flag per transaction: True where the inflow is salary.

    Salary inflows sit in the earnings / credit-bank-transfer categories,
    match no non-salary reference pattern, are at least £100, and are not
    an exact multiple of £10.
    """
    n = len(history)
    flags = np.zeros(n, dtype=bool)
    salary_cats = {CATEGORY_INDEX[c.value] for c in SALARY_CANDIDATE_CATEGORIES}
    for i in range(n):
        amount = history.amounts[i]
        if amount < SALARY_MIN_PENCE or amount % ROUND_TEN_PENCE == 0:
            continue
        if int(history.categories[i]) not in salary_cats:
            continue
        if rules.is_nonsalary_reference(history.descriptions[i]):
            continue
        flags[i] = True
    return flags
