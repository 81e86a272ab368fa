"""Generator determinism, eligibility, balance identity, planted signals."""

import dataclasses
import io

import numpy as np
import pytest

from finvuln.audit import pearson
from finvuln.features import build_feature_matrix
from finvuln.ingest import filter_eligible, write_transactions_csv
from finvuln.synthgen import (
    CohortConfig,
    SynthConfigError,
    default_personas,
    describe_cohort,
    generate_cohort,
    generate_to_files,
    read_ground_truth,
)

from oracles import INCOME, month_key, span_months


def _cohort_bytes(config, personas=None):
    histories, truths = generate_cohort(config, personas)
    buf = io.StringIO()
    for h in histories:
        write_transactions_csv(h.transactions(), buf)
    return buf.getvalue(), truths


class TestDeterminism:
    def test_same_seed_byte_identical(self):
        cfg = CohortConfig(n_accounts=30, months_per_account=7, seed=7)
        a, ta = _cohort_bytes(cfg)
        b, tb = _cohort_bytes(cfg)
        assert a == b
        assert ta == tb

    def test_different_seed_differs(self):
        a, _ = _cohort_bytes(CohortConfig(n_accounts=10, months_per_account=6, seed=1))
        b, _ = _cohort_bytes(CohortConfig(n_accounts=10, months_per_account=6, seed=2))
        assert a != b

    def test_files_byte_identical(self, tmp_path):
        cfg = CohortConfig(n_accounts=15, months_per_account=6, seed=11)
        p1, g1 = generate_to_files(cfg, tmp_path / "a")
        p2, g2 = generate_to_files(cfg, tmp_path / "b")
        assert p1.read_bytes() == p2.read_bytes()
        assert g1.read_bytes() == g2.read_bytes()


class TestStructure:
    def test_all_accounts_eligible(self, small_cohort):
        histories, _ = small_cohort
        kept, _ = filter_eligible(histories)
        assert len(kept) == len(histories)

    def test_running_balance_identity(self, small_cohort):
        histories, _ = small_cohort
        for h in histories:
            diffs = np.diff(h.balances)
            assert (diffs == h.amounts[1:]).all()

    def test_exact_span(self, small_cohort):
        histories, _ = small_cohort
        assert all(h.span_months == 8 for h in histories)

    def test_degenerate_beneficiary_mix(self):
        personas = [dataclasses.replace(p, mix_weight=(1.0 if p.name == "beneficiary" else 0.0))
                    for p in default_personas()]
        histories, truths = generate_cohort(
            CohortConfig(n_accounts=100, months_per_account=6, seed=13), personas
        )
        assert all(t.persona == "beneficiary" for t in truths)
        from finvuln.taxonomy import BENEFIT_CATEGORIES, CATEGORY_INDEX

        benefit_idx = {CATEGORY_INDEX[c.value] for c in BENEFIT_CATEGORIES}
        for h in histories:
            has_benefit = any(
                int(c) in benefit_idx and a > 0 for c, a in zip(h.categories, h.amounts)
            )
            assert has_benefit

    def test_invalid_config_rejected_before_generation(self):
        with pytest.raises(SynthConfigError):
            generate_cohort(CohortConfig(n_accounts=0, months_per_account=6, seed=1))
        with pytest.raises(SynthConfigError):
            generate_cohort(CohortConfig(n_accounts=5, months_per_account=3, seed=1))
        with pytest.raises(SynthConfigError):
            generate_cohort(CohortConfig(n_accounts=5, months_per_account=6, seed=1, planted_proxy_strength=1.5))

    def test_bad_mix_weights_rejected(self):
        personas = default_personas()
        personas[0] = dataclasses.replace(personas[0], mix_weight=personas[0].mix_weight + 0.1)
        with pytest.raises(SynthConfigError):
            generate_cohort(CohortConfig(n_accounts=5, months_per_account=6, seed=1), personas)

    def test_ground_truth_round_trip(self, tmp_path):
        cfg = CohortConfig(n_accounts=20, months_per_account=6, seed=21)
        _tx, gt = generate_to_files(cfg, tmp_path)
        _histories, truths = generate_cohort(cfg)
        assert read_ground_truth(gt) == truths


class TestPlantedSignals:
    def test_zero_strength_decouples_benefits(self):
        cfg = CohortConfig(n_accounts=500, months_per_account=6, seed=17, planted_proxy_strength=0.0)
        histories, truths = generate_cohort(cfg)
        feats = build_feature_matrix(histories)
        child_amount = feats.column("benefit_child_monthly")
        truth_child = np.array([float(t.has_child) for t in truths])
        res = pearson(truth_child, child_amount)
        assert res.r is not None
        assert -0.1 <= res.r <= 0.1

    def test_default_strength_couples_benefits(self, mid_cohort):
        histories, truths = mid_cohort
        feats = build_feature_matrix(histories)
        truth_child = np.array([float(t.has_child) for t in truths])
        res = pearson(truth_child, feats.column("benefit_child_monthly"))
        assert res.r > 0.5 and res.p < 0.001

    def test_female_child_association(self, mid_cohort):
        _histories, truths = mid_cohort
        female = np.array([float(t.gender == "female") for t in truths])
        child = np.array([float(t.has_child) for t in truths])
        res = pearson(female, child)
        assert res.r > 0.3 and res.p < 0.001


class TestDescribe:
    def test_single_account_constant_salary(self):
        from conftest import make_history
        from finvuln.synthgen import GroundTruth
        from finvuln.taxonomy import Category

        rows = []
        for m in range(1, 7):
            rows.append((f"2021-{m:02d}-25", 100_001, Category.EARNINGS, "ACME PAYROLL"))
            for d in range(1, 11):
                rows.append((f"2021-{m:02d}-{d:02d}", -500, Category.CASH, "ATM"))
        h = make_history(rows, account_id="X1")
        truth = [GroundTruth("X1", "credit_user", "female", 30, False, False, False)]
        rows_out = describe_cohort([h], truth)
        (row,) = rows_out
        assert row["salary_monthly_mean"] == pytest.approx(100_001.0)
        assert row["salary_monthly_sd"] == pytest.approx(0.0)

    def test_rows_ordered_by_persona(self, small_cohort):
        histories, truths = small_cohort
        rows = describe_cohort(histories, truths)
        names = [r["persona"] for r in rows]
        assert names == sorted(names)

    def test_means_match_bruteforce(self, small_cohort):
        histories, truths = small_cohort
        rows = describe_cohort(histories, truths)
        by_persona = {r["persona"]: r for r in rows}
        # independent recomputation of monthly income means from raw transactions
        import collections

        sums = collections.defaultdict(list)
        truth_by_id = {t.account_id: t for t in truths}
        for h in histories:
            txns = list(h.transactions())
            months = span_months(txns)
            income = sum(t.amount for t in txns if t.amount > 0 and t.category in INCOME)
            sums[truth_by_id[h.account_id].persona].append(income / months)
        for persona, vals in sums.items():
            assert by_persona[persona]["income_monthly_mean"] == pytest.approx(
                float(np.mean(vals)), abs=1e-9
            )
            assert by_persona[persona]["n_accounts"] == len(vals)

    def test_empty_cohort_errors(self):
        with pytest.raises(ValueError):
            describe_cohort([], [])


def test_window_split_share(mid_cohort):
    histories, _ = mid_cohort
    windows = np.array([int(h.month_keys[-1]) // 3 for h in histories])
    values, counts = np.unique(windows, return_counts=True)
    assert len(values) == 2
    assert values[1] == values[0] + 1
    share = counts[1] / counts.sum()
    assert 0.12 <= share <= 0.28  # later-window share targets 0.2
