"""Parsing, eligibility filtering, keyword classification, salary detection."""

import io

import numpy as np
import pytest

from finvuln.ingest import (
    IngestError,
    check_eligibility,
    detect_salary_inflows,
    filter_eligible,
    group_histories,
    iter_account_rows,
    parse_transactions,
    write_transactions_csv,
    write_transactions_jsonl,
)
from finvuln.rules import DEFAULT_RULES, KeywordRuleSet, classify_reference, load_rules, write_rules
from finvuln.synthgen import CohortConfig, generate_cohort, generate_to_files
from finvuln.taxonomy import Category

from conftest import make_history, random_history

HEADER = "account_id,date,amount_pence,description,category,balance_pence\n"


class TestParse:
    def test_direct_field_mapping(self):
        csv = HEADER + "A1,2021-03-02,-1550,TESCO STORES,groceries_housekeeping,48210\n"
        txns, rejects = parse_transactions(io.StringIO(csv))
        assert rejects == []
        (t,) = txns
        assert t.amount == -1550
        assert t.category == Category.GROCERIES_HOUSEKEEPING
        assert t.balance_after == 48210
        assert t.date.isoformat() == "2021-03-02"

    def test_impossible_date_rejected(self):
        csv = HEADER + "A1,2021-02-30,-1550,TESCO,groceries_housekeeping,100\n"
        txns, rejects = parse_transactions(io.StringIO(csv))
        assert txns == []
        assert len(rejects) == 1
        assert rejects[0].line == 2
        assert rejects[0].reason == "invalid date"

    def test_unknown_category_rejected(self):
        csv = HEADER + "A1,2021-02-11,-1550,SHOP,no_such_category,100\n"
        _, rejects = parse_transactions(io.StringIO(csv))
        assert len(rejects) == 1
        assert "unknown category" in rejects[0].reason

    def test_zero_amount_rejected(self):
        csv = HEADER + "A1,2021-02-11,0,SHOP,cash,100\n"
        _, rejects = parse_transactions(io.StringIO(csv))
        assert rejects[0].reason == "zero amount"

    def test_bad_amount_rejected(self):
        csv = HEADER + "A1,2021-02-11,12.5,SHOP,cash,100\n"
        _, rejects = parse_transactions(io.StringIO(csv))
        assert rejects[0].reason == "invalid amount"

    def test_empty_file_errors(self):
        with pytest.raises(IngestError):
            parse_transactions(io.StringIO(""))

    def test_bad_header_errors(self):
        with pytest.raises(IngestError):
            parse_transactions(io.StringIO("a,b,c\n1,2,3\n"))

    def test_synthetic_file_parses_fully(self, tmp_path):
        tx_path, _ = generate_to_files(
            CohortConfig(n_accounts=12, months_per_account=6, seed=3), tmp_path
        )
        n_rows = sum(1 for _ in open(tx_path)) - 1
        txns, rejects = parse_transactions(tx_path)
        assert rejects == []
        assert len(txns) == n_rows
        assert n_rows >= 12 * 6 * 10

    def test_jsonl_mirror(self, tmp_path):
        h = make_history(
            [("2021-01-02", -1550, Category.GROCERIES_HOUSEKEEPING, 'TESCO, "THE BIG" STORE')]
        )
        path = tmp_path / "t.jsonl"
        write_transactions_jsonl(h.transactions(), path)
        txns, rejects = parse_transactions(path, fmt="jsonl")
        assert rejects == []
        assert txns[0].description == 'TESCO, "THE BIG" STORE'

    def test_csv_round_trip_bit_identical(self, tmp_path):
        tx_path, _ = generate_to_files(
            CohortConfig(n_accounts=8, months_per_account=6, seed=5), tmp_path
        )
        txns, _ = parse_transactions(tx_path)
        out = io.StringIO()
        write_transactions_csv(txns, out)
        assert out.getvalue() == open(tx_path, encoding="utf-8").read()

    def test_streaming_matches_bulk(self, tmp_path):
        tx_path, _ = generate_to_files(
            CohortConfig(n_accounts=6, months_per_account=6, seed=9), tmp_path
        )
        bulk, _ = parse_transactions(tx_path)
        streamed = []
        for _acc, txns, _rej in iter_account_rows(tx_path):
            streamed.extend(txns)
        assert streamed == bulk


class TestEligibility:
    def _history_with_counts(self, counts, start_month=1):
        rows = []
        for m, count in enumerate(counts, start=start_month):
            for i in range(count):
                rows.append((f"2021-{m:02d}-{(i % 27) + 1:02d}", -100 - i, Category.CASH, "ATM"))
        return make_history(rows)

    def test_seven_months_min_twelve_retained(self):
        h = self._history_with_counts([12] * 7)
        assert check_eligibility(h).eligible is True

    def test_five_months_dropped(self):
        h = self._history_with_counts([15] * 5)
        rec = check_eligibility(h)
        assert rec.eligible is False
        assert "span" in rec.reason

    def test_one_thin_month_dropped(self):
        counts = [12, 12, 12, 9, 12, 12, 12, 12]
        h = self._history_with_counts(counts)
        rec = check_eligibility(h)
        assert rec.eligible is False
        # brute-force recheck of the monthly counts
        by_month = {}
        for t in h.transactions():
            key = (t.date.year, t.date.month)
            by_month[key] = by_month.get(key, 0) + 1
        assert min(by_month.values()) == 9

    def test_gap_month_counts_as_zero(self):
        h = self._history_with_counts([12, 12, 0, 12, 12, 12, 12])
        assert check_eligibility(h).eligible is False

    def test_idempotent(self):
        rng = np.random.default_rng(17)
        histories = [random_history(rng, months=int(rng.integers(3, 10)), account_id=f"H{i}") for i in range(30)]
        once, _ = filter_eligible(histories)
        twice, _ = filter_eligible(once)
        assert [h.account_id for h in once] == [h.account_id for h in twice]

    def test_report_covers_all_accounts(self):
        histories = [self._history_with_counts([12] * 7), self._history_with_counts([12] * 3)]
        kept, report = filter_eligible(histories)
        assert len(report) == 2
        assert [r.eligible for r in report] == [True, False]
        assert len(kept) == 1


class TestClassifyReference:
    def test_gambling_term(self):
        assert "gambling" in classify_reference("BET365 DEPOSIT REF 881", DEFAULT_RULES)

    def test_traditional_card(self):
        assert classify_reference("BARCLAYCARD PAYMENT", DEFAULT_RULES) == {"traditional_card"}

    def test_no_match(self):
        assert classify_reference("GROCERY OUTLET", DEFAULT_RULES) == frozenset()

    def test_benefit_subtype_tag(self):
        tags = classify_reference("DWP UNIVERSAL CREDIT", DEFAULT_RULES)
        assert "benefit:universal_credit" in tags

    def test_case_and_whitespace_normalization(self):
        assert "gambling" in classify_reference("  bet365\t DEPOSIT ", DEFAULT_RULES)

    def test_monotone_under_suffix(self):
        rng = np.random.default_rng(19)
        pool = ["BET365", "TESCO", "BARCLAYCARD", "KLARNA", "CHILD BENEFIT", "ZZZ"]
        suffixes = [" REF 12", " LTD", " PAYMENT", " X"]
        for _ in range(200):
            base = " ".join(pool[int(rng.integers(len(pool)))] for _ in range(int(rng.integers(1, 3))))
            suffix = suffixes[int(rng.integers(len(suffixes)))]
            a = classify_reference(base, DEFAULT_RULES)
            b = classify_reference(base + suffix, DEFAULT_RULES)
            assert a <= b

    def test_provider_term_disjointness_enforced(self):
        with pytest.raises(ValueError):
            KeywordRuleSet(
                gambling=(),
                traditional_card=("zopa",),
                nontraditional_card=(),
                traditional_loan=("zopa",),
                nontraditional_loan=(),
                payday=(),
                bnpl=(),
                nonsalary=(),
            )

    def test_rules_file_round_trip(self, tmp_path):
        path = tmp_path / "rules.txt"
        write_rules(path)
        loaded = load_rules(path)
        assert loaded == DEFAULT_RULES


class TestSalaryDetection:
    def _flags(self, rows):
        h = make_history(rows)
        return h, detect_salary_inflows(h)

    def test_clean_earnings_inflow(self):
        _h, flags = self._flags([("2021-01-25", 124_317, Category.EARNINGS, "ACME PAYROLL")])
        assert flags[0]

    def test_under_hundred_pounds_excluded(self):
        _h, flags = self._flags([("2021-01-25", 5_000, Category.EARNINGS, "ACME PAYROLL")])
        assert not flags[0]

    def test_multiple_of_ten_pounds_excluded(self):
        _h, flags = self._flags([("2021-01-25", 25_000, Category.EARNINGS, "ACME PAYROLL")])
        assert not flags[0]

    def test_nonsalary_reference_excluded(self):
        _h, flags = self._flags([("2021-01-25", 124_317, Category.CREDIT_BANK_TRANSFERS, "MOBILE TRANSFER PAYM")])
        assert not flags[0]

    def test_wrong_category_excluded(self):
        _h, flags = self._flags([("2021-01-25", 124_317, Category.LOANS, "ZOPA LOAN FUNDS")])
        assert not flags[0]

    def test_gambling_inflow_excluded(self):
        _h, flags = self._flags([("2021-01-25", 124_317, Category.CREDIT_BANK_TRANSFERS, "BET365 WITHDRAWAL")])
        assert not flags[0]

    def test_oracle_agreement(self):
        from oracles import salary_flags_oracle

        rng = np.random.default_rng(23)
        for i in range(50):
            h = random_history(rng, months=7, account_id=f"SA{i}")
            ours = list(detect_salary_inflows(h))
            ref = salary_flags_oracle(list(h.transactions()), DEFAULT_RULES)
            assert ours == ref


def test_group_histories_orders_and_sorts():
    csv = (
        HEADER
        + "B2,2021-01-05,-100,X,cash,900\n"
        + "A1,2021-01-03,-100,X,cash,100\n"
        + "B2,2021-01-05,-50,Y,cash,850\n"  # same day: file order preserved
        + "A1,2021-01-02,200,Z,earnings,200\n"
    )
    txns, _ = parse_transactions(io.StringIO(csv))
    histories = group_histories(txns)
    assert [h.account_id for h in histories] == ["B2", "A1"]
    b2 = list(histories[0].transactions())
    assert [t.description for t in b2] == ["X", "Y"]
    a1 = list(histories[1].transactions())
    assert [t.date.day for t in a1] == [2, 3]
