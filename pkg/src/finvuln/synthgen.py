"""Reproducible synthetic account cohorts.

Five behavioral personas span the spectrum from financially secure to
benefit-dependent; a cohort-level ``planted_proxy_strength`` controls
how strongly the true child / carer / disability attributes drive
benefit inflows and category spending, so proxy-leakage audits have a
known ground truth.  Generation is deterministic: each account owns a
random stream derived from the master seed and its index, so outputs do
not depend on generation order or worker count.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .features import HistoryAggregates
from .ingest import (
    AccountHistory,
    GivenDemographics,
    Transaction,
    history_from_transactions,
    write_transactions_csv,
)
from .seeding import substream
from .taxonomy import Category

PERSONA_NAMES = (
    "beneficiary",
    "credit_user",
    "financially_resilient",
    "financially_secure",
    "young_challenged",
)

GROUND_TRUTH_HEADER = ["account_id", "persona", "gender", "age", "disability", "carer", "has_child"]

# strength-scaled planting coefficients (the attribute -> behavior channels)
CHILD_SCHOOL_BOOST = 14_000  # pence/month added for parents at full strength
FEMALE_CHILD_SHIFT = (0.45, -0.10)  # P(female) shift for parents / non-parents
FEMALE_FASHION_MULT = 0.40
FEMALE_GROCERIES_MULT = 0.15
FEMALE_GAMBLING_MULT = -0.50
CARER_DISABILITY_OVERLAP = 0.6  # carers receiving the disability benefit on another's behalf

TXNS_PER_MONTH_FLOOR = 10

_SPEND_INTENSITY = {
    "cash": 3,
    "charity_donation": 1,
    "child_school": 2,
    "eating_out_takeaways": 5,
    "fashion_beauty": 2,
    "fun_leisure": 3,
    "groceries_housekeeping": 6,
    "health_fitness": 1,
    "housing": 1,
    "medical_health": 1,
    "subscriptions": 2,
    "transport_fuel": 4,
    "utilities": 2,
}

_MERCHANTS = {
    "cash": ["CASH WITHDRAWAL ATM", "LINK ATM CASH"],
    "charity_donation": ["OXFAM DONATION", "RED CROSS GIFT"],
    "child_school": ["SCHOOL DINNERS LTD", "KIDS CLUB FEES", "UNIFORM SHOP"],
    "eating_out_takeaways": ["PIZZA PALACE", "CURRY HOUSE", "DELIVERY EATS", "CAFE CORNER"],
    "fashion_beauty": ["HIGH ST FASHION", "BEAUTY SUPPLIES", "SHOE BOX"],
    "fun_leisure": ["CINEMA WORLD", "BOWLING LANES", "STREAMFLIX EXTRA"],
    "groceries_housekeeping": ["TESCO STORES", "SAINSBURYS LOCAL", "ALDI STORES", "CORNER SHOP"],
    "health_fitness": ["GYM MEMBERSHIP", "SWIM CENTRE"],
    "housing": ["RENT STANDING ORDER", "MORTGAGE PAYMENT"],
    "medical_health": ["PHARMACY ONE", "DENTAL CARE"],
    "subscriptions": ["STREAMFLIX", "MUSIC SUB", "NEWS DIGITAL"],
    "transport_fuel": ["PETROL STATION", "RAIL TICKETS", "BUS PASS"],
    "utilities": ["POWER ENERGY CO", "WATER BOARD", "BROADBAND CO"],
}

_EMPLOYERS = [
    "NORTHSHIRE COUNCIL",
    "ROYAL INFIRMARY TRUST",
    "CITY TRANSPORT GROUP",
    "EDUCATION SERVICES LTD",
    "PARKS AND LEISURE DEPT",
    "METRO LOGISTICS",
    "CARE AT HOME LTD",
    "CIVIC LIBRARY SERVICE",
]

_GAMBLING_DESCS = ["BET365 DEPOSIT", "LADBROKES ONLINE", "PADDY POWER BET", "NATIONAL LOTTERY TICKETS"]
_GAMBLING_WIN_DESCS = ["BET365 WITHDRAWAL", "LADBROKES PAYOUT"]
_BNPL_DESCS = ["KLARNA PAYMENT", "CLEARPAY INSTALMENT"]
_BENEFIT_DESCS = {
    "disability": "DWP PIP PAYMENT",
    "carer": "CARERS ALLOWANCE DWP",
    "child": "CHILD BENEFIT",
    "child_tax_credit": "CHILD TAX CREDIT",
    "working_tax_credit": "WORKING TAX CREDIT",
    "universal_credit": "DWP UNIVERSAL CREDIT",
    "employment_support": "DWP ESA PAYMENT",
}
_CARD_DESCS = {
    "traditional": ["BARCLAYCARD PAYMENT", "CAPITAL ONE PAYMENT", "MBNA CARD PAYMENT"],
    "nontraditional": ["MONZO CARD PAYMENT", "STARLING CARD PAYMENT"],
}
_LOAN_DESCS = {
    "traditional": ["HSBC LOAN REPAYMENT", "BARCLAYS LOAN DD"],
    "nontraditional": ["ZOPA LOAN PAYMENT", "LENDABLE REPAYMENT"],
}
_PAYDAY_DESCS = ["LENDING STREAM", "MR LENDER", "CASHFLOAT"]


class SynthConfigError(ValueError):
    pass


@dataclass
class PersonaSpec:
    """Generative parameter block for one applicant persona.

    Amount parameters are integer pence; rate parameters are monthly
    probabilities or Poisson intensities.
    """

    name: str
    mix_weight: float
    age_mean: float
    age_sd: float
    p_female: float
    p_child: float
    p_carer: float
    p_disability: float
    salary_level: int
    salary_level_sd: int
    salary_month_sd: int
    p_weekly_pay: float
    p_second_source: float
    p_skip_salary_month: float
    spend_rates: Dict[str, int]
    spend_sigma: float
    fixed_jitter: float
    p_gambling: float
    gambling_monthly: int
    gambling_sigma: float
    balance_target: int
    balance_band_sd: int
    start_balance_sd: int
    rdd_rate: float
    bnpl_rate: float
    p_insolvent: float
    dm_monthly: int
    p_insurance: float
    insurance_monthly: int
    p_pension_contrib: float
    pension_contrib_monthly: int
    p_pension_income: float
    pension_income_monthly: int
    p_savings: float
    savings_monthly: int
    benefit_rates: Dict[str, float]
    benefit_amounts: Dict[str, int]
    p_card_traditional: float
    p_card_nontraditional: float
    p_loan_traditional: float
    p_loan_nontraditional: float
    p_payday: float
    card_payment_monthly: int
    loan_event_rate: float
    loan_amount: int

    def validate(self) -> List[str]:
        problems = []
        if not (0.0 <= self.mix_weight <= 1.0):
            problems.append(f"{self.name}: mix_weight {self.mix_weight} outside [0,1]")
        for cat, rate in self.spend_rates.items():
            if cat not in _SPEND_INTENSITY:
                problems.append(f"{self.name}: unknown spend category {cat!r}")
            if rate < 0:
                problems.append(f"{self.name}: spend rate for {cat} negative")
        for sub, rate in self.benefit_rates.items():
            if sub not in _BENEFIT_DESCS:
                problems.append(f"{self.name}: unknown benefit subtype {sub!r}")
            if not (0.0 <= rate <= 1.0):
                problems.append(f"{self.name}: benefit rate {sub} outside [0,1]")
        for attr in ("salary_level", "gambling_monthly", "dm_monthly"):
            if getattr(self, attr) < 0:
                problems.append(f"{self.name}: {attr} negative")
        return problems

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "PersonaSpec":
        return cls(**obj)


@dataclass
class CohortConfig:
    n_accounts: int = 500
    months_per_account: int = 12
    seed: int = 7
    planted_proxy_strength: float = 0.8
    anchor_month: str = "2022-07"  # first end-month of the train window
    later_window_share: float = 0.2  # accounts ending in the next 3-month window

    def validate(self) -> List[str]:
        problems = []
        if self.n_accounts < 1:
            problems.append("n_accounts must be >= 1")
        if self.months_per_account < 6:
            problems.append("months_per_account must be >= 6")
        if not (0.0 <= self.planted_proxy_strength <= 1.0):
            problems.append("planted_proxy_strength must lie in [0,1]")
        if not (0.0 <= self.later_window_share <= 1.0):
            problems.append("later_window_share must lie in [0,1]")
        try:
            dt.datetime.strptime(self.anchor_month, "%Y-%m")
        except ValueError:
            problems.append(f"anchor_month {self.anchor_month!r} is not YYYY-MM")
        return problems

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "CohortConfig":
        return cls(**obj)


def default_personas() -> List[PersonaSpec]:
    """Built-in persona blocks; the config file can replace any field."""

    def spends(**kw):
        base = {k: 0 for k in _SPEND_INTENSITY}
        base.update(kw)
        return base

    return [
        PersonaSpec(
            name="beneficiary",
            mix_weight=0.29,
            age_mean=36, age_sd=9, p_female=0.42, p_child=0.75, p_carer=0.12, p_disability=0.15,
            salary_level=110_000, salary_level_sd=10_000, salary_month_sd=24_000,
            p_weekly_pay=0.2, p_second_source=0.25, p_skip_salary_month=0.25,
            spend_rates=spends(
                housing=30_000, utilities=12_000, groceries_housekeeping=30_000,
                transport_fuel=8_000, subscriptions=4_000, eating_out_takeaways=10_000,
                fashion_beauty=9_000, fun_leisure=8_000, cash=9_000, health_fitness=2_000,
                medical_health=3_000, charity_donation=800, child_school=2_000,
            ),
            spend_sigma=0.25, fixed_jitter=0.12,
            p_gambling=1.0, gambling_monthly=1_500, gambling_sigma=0.7,
            balance_target=15_000, balance_band_sd=10_000, start_balance_sd=8_000,
            rdd_rate=1.6, bnpl_rate=1.2, p_insolvent=0.08, dm_monthly=7_000,
            p_insurance=0.1, insurance_monthly=5_000,
            p_pension_contrib=0.05, pension_contrib_monthly=4_000,
            p_pension_income=0.03, pension_income_monthly=40_000,
            p_savings=0.15, savings_monthly=4_000,
            benefit_rates={
                "child": 0.30, "child_tax_credit": 0.20, "carer": 0.06, "disability": 0.08,
                "universal_credit": 1.0, "working_tax_credit": 0.25, "employment_support": 0.10,
            },
            benefit_amounts={
                "child": 9_000, "child_tax_credit": 11_000, "carer": 27_000, "disability": 24_000,
                "universal_credit": 60_000, "working_tax_credit": 18_000, "employment_support": 32_000,
            },
            p_card_traditional=0.25, p_card_nontraditional=0.35,
            p_loan_traditional=0.10, p_loan_nontraditional=0.25, p_payday=0.15,
            card_payment_monthly=8_000, loan_event_rate=0.08, loan_amount=25_000,
        ),
        PersonaSpec(
            name="credit_user",
            mix_weight=0.20,
            age_mean=32, age_sd=8, p_female=0.40, p_child=0.30, p_carer=0.02, p_disability=0.05,
            salary_level=200_000, salary_level_sd=14_000, salary_month_sd=10_000,
            p_weekly_pay=0.10, p_second_source=0.20, p_skip_salary_month=0.03,
            spend_rates=spends(
                housing=52_000, utilities=14_000, groceries_housekeeping=28_000,
                transport_fuel=16_000, subscriptions=6_000, eating_out_takeaways=16_000,
                fashion_beauty=10_000, fun_leisure=12_000, cash=8_000, health_fitness=3_000,
                medical_health=2_000, charity_donation=500, child_school=800,
            ),
            spend_sigma=0.22, fixed_jitter=0.14,
            p_gambling=1.0, gambling_monthly=14_000, gambling_sigma=0.75,
            balance_target=30_000, balance_band_sd=14_000, start_balance_sd=11_000,
            rdd_rate=1.3, bnpl_rate=1.0, p_insolvent=0.15, dm_monthly=9_000,
            p_insurance=0.2, insurance_monthly=7_000,
            p_pension_contrib=0.10, pension_contrib_monthly=5_000,
            p_pension_income=0.02, pension_income_monthly=30_000,
            p_savings=0.10, savings_monthly=5_000,
            benefit_rates={
                "child": 0.18, "child_tax_credit": 0.08, "carer": 0.02, "disability": 0.04,
                "universal_credit": 0.25, "working_tax_credit": 0.10, "employment_support": 0.03,
            },
            benefit_amounts={
                "child": 9_000, "child_tax_credit": 11_000, "carer": 27_000, "disability": 24_000,
                "universal_credit": 40_000, "working_tax_credit": 15_000, "employment_support": 30_000,
            },
            p_card_traditional=0.85, p_card_nontraditional=0.60,
            p_loan_traditional=0.50, p_loan_nontraditional=0.55, p_payday=0.60,
            card_payment_monthly=38_000, loan_event_rate=0.30, loan_amount=50_000,
        ),
        PersonaSpec(
            name="financially_resilient",
            mix_weight=0.16,
            age_mean=52, age_sd=7, p_female=0.50, p_child=0.12, p_carer=0.03, p_disability=0.06,
            salary_level=215_000, salary_level_sd=14_000, salary_month_sd=6_000,
            p_weekly_pay=0.02, p_second_source=0.05, p_skip_salary_month=0.01,
            spend_rates=spends(
                housing=55_000, utilities=16_000, groceries_housekeeping=30_000,
                transport_fuel=14_000, subscriptions=5_000, eating_out_takeaways=8_000,
                fashion_beauty=3_000, fun_leisure=6_000, cash=5_000, health_fitness=4_000,
                medical_health=4_000, charity_donation=2_000, child_school=500,
            ),
            spend_sigma=0.12, fixed_jitter=0.03,
            p_gambling=1.0, gambling_monthly=1_200, gambling_sigma=0.6,
            balance_target=80_000, balance_band_sd=22_000, start_balance_sd=15_000,
            rdd_rate=0.05, bnpl_rate=0.05, p_insolvent=0.01, dm_monthly=5_000,
            p_insurance=0.95, insurance_monthly=22_000,
            p_pension_contrib=0.95, pension_contrib_monthly=32_000,
            p_pension_income=0.40, pension_income_monthly=70_000,
            p_savings=0.85, savings_monthly=35_000,
            benefit_rates={
                "child": 0.08, "child_tax_credit": 0.03, "carer": 0.03, "disability": 0.05,
                "universal_credit": 0.02, "working_tax_credit": 0.03, "employment_support": 0.01,
            },
            benefit_amounts={
                "child": 9_000, "child_tax_credit": 11_000, "carer": 27_000, "disability": 24_000,
                "universal_credit": 40_000, "working_tax_credit": 15_000, "employment_support": 30_000,
            },
            p_card_traditional=0.50, p_card_nontraditional=0.10,
            p_loan_traditional=0.25, p_loan_nontraditional=0.05, p_payday=0.30,
            card_payment_monthly=12_000, loan_event_rate=0.05, loan_amount=50_000,
        ),
        PersonaSpec(
            name="financially_secure",
            mix_weight=0.19,
            age_mean=58, age_sd=6, p_female=0.50, p_child=0.10, p_carer=0.02, p_disability=0.10,
            salary_level=300_000, salary_level_sd=18_000, salary_month_sd=4_000,
            p_weekly_pay=0.01, p_second_source=0.05, p_skip_salary_month=0.005,
            spend_rates=spends(
                housing=90_000, utilities=22_000, groceries_housekeeping=45_000,
                transport_fuel=20_000, subscriptions=9_000, eating_out_takeaways=28_000,
                fashion_beauty=16_000, fun_leisure=20_000, cash=10_000, health_fitness=8_000,
                medical_health=9_000, charity_donation=6_000, child_school=1_000,
            ),
            spend_sigma=0.10, fixed_jitter=0.02,
            p_gambling=1.0, gambling_monthly=2_500, gambling_sigma=0.6,
            balance_target=250_000, balance_band_sd=45_000, start_balance_sd=30_000,
            rdd_rate=0.01, bnpl_rate=0.02, p_insolvent=0.005, dm_monthly=5_000,
            p_insurance=0.90, insurance_monthly=8_000,
            p_pension_contrib=0.80, pension_contrib_monthly=9_000,
            p_pension_income=0.40, pension_income_monthly=80_000,
            p_savings=0.70, savings_monthly=15_000,
            benefit_rates={
                "child": 0.06, "child_tax_credit": 0.02, "carer": 0.02, "disability": 0.12,
                "universal_credit": 0.01, "working_tax_credit": 0.01, "employment_support": 0.005,
            },
            benefit_amounts={
                "child": 9_000, "child_tax_credit": 11_000, "carer": 27_000, "disability": 24_000,
                "universal_credit": 40_000, "working_tax_credit": 15_000, "employment_support": 30_000,
            },
            p_card_traditional=0.60, p_card_nontraditional=0.15,
            p_loan_traditional=0.20, p_loan_nontraditional=0.05, p_payday=0.03,
            card_payment_monthly=30_000, loan_event_rate=0.03, loan_amount=60_000,
        ),
        PersonaSpec(
            name="young_challenged",
            mix_weight=0.16,
            age_mean=22, age_sd=3, p_female=0.45, p_child=0.08, p_carer=0.01, p_disability=0.02,
            salary_level=60_000, salary_level_sd=7_000, salary_month_sd=16_000,
            p_weekly_pay=0.70, p_second_source=0.30, p_skip_salary_month=0.12,
            spend_rates=spends(
                housing=8_000, utilities=3_000, groceries_housekeeping=10_000,
                transport_fuel=7_000, subscriptions=3_500, eating_out_takeaways=8_000,
                fashion_beauty=6_000, fun_leisure=8_000, cash=5_000, health_fitness=1_200,
                medical_health=800, charity_donation=300, child_school=300,
            ),
            spend_sigma=0.35, fixed_jitter=0.30,
            p_gambling=1.0, gambling_monthly=9_000, gambling_sigma=0.85,
            balance_target=3_000, balance_band_sd=8_000, start_balance_sd=6_000,
            rdd_rate=0.7, bnpl_rate=0.8, p_insolvent=0.05, dm_monthly=6_000,
            p_insurance=0.08, insurance_monthly=3_000,
            p_pension_contrib=0.03, pension_contrib_monthly=2_000,
            p_pension_income=0.0, pension_income_monthly=0,
            p_savings=0.10, savings_monthly=3_000,
            benefit_rates={
                "child": 0.06, "child_tax_credit": 0.03, "carer": 0.01, "disability": 0.02,
                "universal_credit": 0.15, "working_tax_credit": 0.05, "employment_support": 0.03,
            },
            benefit_amounts={
                "child": 9_000, "child_tax_credit": 11_000, "carer": 27_000, "disability": 24_000,
                "universal_credit": 40_000, "working_tax_credit": 15_000, "employment_support": 30_000,
            },
            p_card_traditional=0.15, p_card_nontraditional=0.55,
            p_loan_traditional=0.05, p_loan_nontraditional=0.45, p_payday=0.25,
            card_payment_monthly=6_000, loan_event_rate=0.15, loan_amount=20_000,
        ),
    ]


@dataclass
class GroundTruth:
    account_id: str
    persona: str
    gender: str
    age: int
    disability: bool
    carer: bool
    has_child: bool

    def row(self) -> List:
        return [
            self.account_id,
            self.persona,
            self.gender,
            self.age,
            int(self.disability),
            int(self.carer),
            int(self.has_child),
        ]


def _month_length(mk: int) -> int:
    year, month = mk // 12, mk % 12 + 1
    if month == 12:
        nxt = dt.date(year + 1, 1, 1)
    else:
        nxt = dt.date(year, month + 1, 1)
    return (nxt - dt.date(year, month, 1)).days


def _date(mk: int, dom: int) -> dt.date:
    return dt.date(mk // 12, mk % 12 + 1, min(dom, _month_length(mk)))


class _AccountBuilder:
    """Assembles one account month by month, then threads balances."""

    def __init__(self, account_id: str, rng: np.random.Generator, persona: PersonaSpec, cfg: CohortConfig):
        self.account_id = account_id
        self.rng = rng
        self.persona = persona
        self.cfg = cfg
        self.items: List[Tuple[int, int, int, Category, str]] = []  # (mk, dom, amount, cat, desc)

    def add(self, mk: int, dom: int, amount: int, cat: Category, desc: str) -> None:
        if amount != 0:
            self.items.append((mk, dom, int(amount), cat, desc))

    def month_count(self, mk: int) -> int:
        return sum(1 for it in self.items if it[0] == mk)

    def lognormal_amount(self, mean: float, sigma: float) -> int:
        if mean <= 0:
            return 0
        # lognormal with the requested mean
        mu = np.log(mean) - 0.5 * sigma * sigma
        return int(round(float(self.rng.lognormal(mu, sigma))))

    def split_amount(self, total: int, n: int) -> List[int]:
        if n <= 1 or total < 2 * n:
            return [total]
        weights = self.rng.random(n) + 0.2
        shares = np.floor(total * weights / weights.sum()).astype(int)
        shares[-1] = total - int(shares[:-1].sum())
        return [int(s) for s in shares if s > 0]


def _draw_demographics(rng: np.random.Generator, persona: PersonaSpec, strength: float):
    has_child = bool(rng.random() < persona.p_child)
    carer = bool(rng.random() < persona.p_carer)
    disability = bool(rng.random() < persona.p_disability)
    shift = FEMALE_CHILD_SHIFT[0] if has_child else FEMALE_CHILD_SHIFT[1]
    p_female = min(max(persona.p_female + strength * shift, 0.02), 0.98)
    gender = "female" if rng.random() < p_female else "male"
    age = int(np.clip(round(rng.normal(persona.age_mean, persona.age_sd)), 18, 85))
    return gender, age, disability, carer, has_child


def _benefit_received(rng, base: float, flag: Optional[bool], strength: float) -> bool:
    """Interpolates between independence (strength 0) and a clean proxy."""
    if flag is None:  # benefit not tied to a protected flag
        return bool(rng.random() < base)
    if flag:
        p = base + (1.0 - base) * strength
    else:
        p = base * (1.0 - strength)
    return bool(rng.random() < p)


def generate_account(
    account_id: str,
    stream: np.random.SeedSequence,
    personas: Sequence[PersonaSpec],
    weights: np.ndarray,
    cfg: CohortConfig,
) -> Tuple[AccountHistory, GroundTruth]:
    rng = np.random.Generator(np.random.PCG64(stream))
    persona = personas[int(rng.choice(len(personas), p=weights))]
    s = cfg.planted_proxy_strength
    gender, age, disability, carer, has_child = _draw_demographics(rng, persona, s)
    female = gender == "female"

    anchor = dt.datetime.strptime(cfg.anchor_month, "%Y-%m")
    anchor_mk = anchor.year * 12 + anchor.month - 1
    in_later = rng.random() < cfg.later_window_share
    end_mk = anchor_mk + (3 if in_later else 0) + int(rng.integers(3))
    start_mk = end_mk - cfg.months_per_account + 1

    b = _AccountBuilder(account_id, rng, persona, cfg)

    # account-level draws
    weekly_pay = rng.random() < persona.p_weekly_pay
    pay_dom = int(rng.integers(23, 29))
    pay_dow = int(rng.integers(0, 5))
    employers = list(rng.choice(_EMPLOYERS, size=2, replace=False))
    second_source = rng.random() < persona.p_second_source
    salary_level = max(int(rng.normal(persona.salary_level, persona.salary_level_sd)), 15_000)

    gambles = rng.random() < persona.p_gambling
    insolvent_plan = rng.random() < persona.p_insolvent
    has_insurance = rng.random() < persona.p_insurance
    pays_pension = rng.random() < persona.p_pension_contrib
    pension_income = rng.random() < persona.p_pension_income
    saves = rng.random() < persona.p_savings

    receives = {
        "child": _benefit_received(rng, persona.benefit_rates["child"], has_child, s),
        "child_tax_credit": _benefit_received(
            rng, persona.benefit_rates["child_tax_credit"], has_child, s
        ),
        "carer": _benefit_received(rng, persona.benefit_rates["carer"], carer, s),
        "disability": _benefit_received(rng, persona.benefit_rates["disability"], disability, s),
        "universal_credit": _benefit_received(rng, persona.benefit_rates["universal_credit"], None, s),
        "working_tax_credit": _benefit_received(rng, persona.benefit_rates["working_tax_credit"], None, s),
        "employment_support": _benefit_received(rng, persona.benefit_rates["employment_support"], None, s),
    }
    if receives["carer"] and rng.random() < CARER_DISABILITY_OVERLAP * s:
        receives["disability"] = True
    benefit_dom = {sub: int(rng.integers(2, 11)) for sub in receives}

    cards = {
        "traditional": list(
            rng.choice(
                _CARD_DESCS["traditional"],
                size=1 + int(rng.random() < 0.4),
                replace=False,
            )
        )
        if rng.random() < persona.p_card_traditional
        else [],
        "nontraditional": list(
            rng.choice(_CARD_DESCS["nontraditional"], size=1, replace=False)
        )
        if rng.random() < persona.p_card_nontraditional
        else [],
    }
    loans = {
        "traditional": [_LOAN_DESCS["traditional"][int(rng.integers(len(_LOAN_DESCS["traditional"])))]]
        if rng.random() < persona.p_loan_traditional
        else [],
        "nontraditional": [
            _LOAN_DESCS["nontraditional"][int(rng.integers(len(_LOAN_DESCS["nontraditional"])))]
        ]
        if rng.random() < persona.p_loan_nontraditional
        else [],
    }
    payday_lender = (
        _PAYDAY_DESCS[int(rng.integers(len(_PAYDAY_DESCS)))] if rng.random() < persona.p_payday else None
    )
    sub_doms = {cat: int(rng.integers(3, 20)) for cat in ("subscriptions", "utilities", "housing", "insurance")}

    child_school_boost = int(s * CHILD_SCHOOL_BOOST) if has_child else 0
    fashion_mult = 1.0 + (FEMALE_FASHION_MULT * s if female else 0.0)
    groceries_mult = 1.0 + (FEMALE_GROCERIES_MULT * s if female else 0.0)
    gambling_mult = max(1.0 + (FEMALE_GAMBLING_MULT * s if female else 0.0), 0.05)

    for mk in range(start_mk, end_mk + 1):
        mlen = _month_length(mk)
        # salary
        if rng.random() >= persona.p_skip_salary_month:
            if weekly_pay:
                weekly = salary_level / 4.33
                for dom in range(1, mlen + 1):
                    if _date(mk, dom).weekday() == pay_dow:
                        amt = int(rng.normal(weekly, persona.salary_month_sd / 4.0))
                        b.add(mk, dom, max(amt, 2_500), Category.EARNINGS, f"{employers[0]} PAYROLL")
            else:
                amt = max(int(rng.normal(salary_level, persona.salary_month_sd)), 10_100)
                dom = int(np.clip(pay_dom + rng.integers(-1, 2), 1, mlen))
                b.add(mk, dom, amt, Category.EARNINGS, f"{employers[0]} PAYROLL")
            if second_source and rng.random() < 0.5:
                amt = max(int(rng.normal(salary_level * 0.18, 6_000)), 3_000)
                b.add(mk, int(rng.integers(1, mlen + 1)), amt, Category.CREDIT_BANK_TRANSFERS, f"{employers[1]} PAY")
        # small irregular transfers in (never salary: < £100 or multiples of £10)
        for _ in range(int(rng.poisson(0.8))):
            small = int(rng.integers(5, 99)) * 100  # multiples of £1 below £100
            b.add(mk, int(rng.integers(1, mlen + 1)), small, Category.CREDIT_BANK_TRANSFERS, "MOBILE TRANSFER PAYM")

        # benefits
        for sub, got in receives.items():
            if not got:
                continue
            base_amt = persona.benefit_amounts[sub]
            amt = max(int(rng.normal(base_amt, base_amt * 0.05)), 500)
            cat = Category("benefit_" + sub)
            b.add(mk, min(benefit_dom[sub], mlen), amt, cat, _BENEFIT_DESCS[sub])
        if pension_income:
            amt = max(int(rng.normal(persona.pension_income_monthly, 2_000)), 1_000)
            b.add(mk, min(6, mlen), amt, Category.PENSION, "PENSION PROVIDER INCOME")

        # spending by category
        for cat_name, rate in persona.spend_rates.items():
            if cat_name == "child_school":
                rate = rate + child_school_boost
            elif cat_name == "fashion_beauty":
                rate = int(rate * fashion_mult)
            elif cat_name == "groceries_housekeeping":
                rate = int(rate * groceries_mult)
            if rate <= 0:
                continue
            cat = Category(cat_name)
            fixed_like = cat_name in ("housing", "utilities", "subscriptions")
            sigma = persona.fixed_jitter if fixed_like else persona.spend_sigma
            total = b.lognormal_amount(rate, sigma)
            if total <= 0:
                continue
            n_txns = max(1, int(rng.poisson(_SPEND_INTENSITY[cat_name])))
            merchants = _MERCHANTS[cat_name]
            for part in b.split_amount(total, n_txns):
                if fixed_like:
                    dom = int(np.clip(sub_doms[cat_name] + int(rng.integers(-1, 2)), 1, mlen))
                else:
                    dom = int(rng.integers(1, mlen + 1))
                desc = merchants[int(rng.integers(len(merchants)))]
                b.add(mk, dom, -part, cat, desc)

        # gambling
        if gambles:
            total = b.lognormal_amount(persona.gambling_monthly * gambling_mult, persona.gambling_sigma)
            if total > 0:
                for part in b.split_amount(total, max(1, int(rng.poisson(3)))):
                    desc = _GAMBLING_DESCS[int(rng.integers(len(_GAMBLING_DESCS)))]
                    b.add(mk, int(rng.integers(1, mlen + 1)), -part, Category.GAMBLING, desc)
                if rng.random() < 0.3:
                    win = int(total * rng.uniform(0.1, 0.6))
                    desc = _GAMBLING_WIN_DESCS[int(rng.integers(len(_GAMBLING_WIN_DESCS)))]
                    b.add(mk, int(rng.integers(1, mlen + 1)), win, Category.GAMBLING, desc)

        # planning
        if has_insurance:
            amt = max(int(rng.normal(persona.insurance_monthly, persona.insurance_monthly * 0.03)), 300)
            b.add(mk, min(sub_doms["insurance"], mlen), -amt, Category.INSURANCE, "HOME COVER INSURANCE")
        if pays_pension:
            amt = max(int(rng.normal(persona.pension_contrib_monthly, 500)), 300)
            b.add(mk, min(28, mlen), -amt, Category.PENSION, "WORKPLACE PENSION CONTRIB")
        if saves and rng.random() < 0.85:
            amt = b.lognormal_amount(persona.savings_monthly, 0.3)
            if amt > 0:
                cat = Category.DEBIT_INTERNAL_TRANSFERS if rng.random() < 0.5 else Category.SAVINGS_INVESTMENTS
                b.add(mk, int(rng.integers(1, mlen + 1)), -amt, cat, "TRANSFER TO SAVINGS POT")

        # inclusion: cards and loans
        for klass, descs in cards.items():
            for desc in descs:
                amt = b.lognormal_amount(
                    max(persona.card_payment_monthly // max(len(descs), 1), 1_000), 0.25
                )
                if amt > 0:
                    b.add(mk, int(rng.integers(mlen - 9, mlen + 1)), -amt, Category.CREDIT_CARD_PAYMENTS, desc)
        for klass, descs in loans.items():
            for desc in descs:
                if rng.random() < 0.8:
                    amt = b.lognormal_amount(max(persona.loan_amount // 8, 1_500), 0.2)
                    b.add(mk, int(rng.integers(1, mlen + 1)), -amt, Category.LOANS, desc)
        if rng.random() < persona.loan_event_rate:
            desc = payday_lender or (loans["nontraditional"] + loans["traditional"] + ["CONSOLIDATION LOAN"])[0]
            b.add(mk, int(rng.integers(1, mlen + 1)), persona.loan_amount, Category.LOANS, f"{desc} FUNDS")
        if payday_lender and rng.random() < 0.7:
            amt = b.lognormal_amount(max(persona.loan_amount // 6, 1_200), 0.25)
            b.add(mk, int(rng.integers(1, mlen + 1)), -amt, Category.LOANS, f"{payday_lender} REPAYMENT")

        # distress
        for _ in range(int(rng.poisson(persona.rdd_rate))):
            amt = int(rng.integers(2_000, 9_000))
            b.add(mk, int(rng.integers(1, mlen + 1)), amt, Category.RETURNED_DIRECT_DEBITS, "DD RETURNED UNPAID")
        for _ in range(int(rng.poisson(persona.bnpl_rate))):
            amt = int(rng.integers(1_200, 6_000))
            desc = _BNPL_DESCS[int(rng.integers(len(_BNPL_DESCS)))]
            b.add(mk, int(rng.integers(1, mlen + 1)), -amt, Category.FASHION_BEAUTY, desc)
        if insolvent_plan:
            amt = max(int(rng.normal(persona.dm_monthly, 800)), 500)
            b.add(mk, min(15, mlen), -amt, Category.DEBT_MANAGEMENT_INSOLVENCY, "DEBT PLAN STEPCHANGE")

        # guarantee the eligibility floor
        while b.month_count(mk) < TXNS_PER_MONTH_FLOOR:
            amt = -int(rng.integers(200, 1_500))
            b.add(mk, int(rng.integers(1, mlen + 1)), amt, Category.CASH, "CASH WITHDRAWAL ATM")

    # thread balances month by month: an overdraft fee lands early in the
    # month after any negative running balance, and a month-end steering
    # transfer pulls the closing balance back toward the persona's band
    start_balance = int(rng.normal(persona.balance_target, persona.start_balance_sd))
    order = sorted(
        range(len(b.items)), key=lambda i: (b.items[i][0], b.items[i][1], i)
    )  # month, day, insertion order
    ordered = [b.items[i] for i in order]
    txns: List[Transaction] = []
    balance = start_balance
    pos = 0
    prev_month_negative = False
    for mk in range(start_mk, end_mk + 1):
        mlen = _month_length(mk)
        month_items = []
        while pos < len(ordered) and ordered[pos][0] == mk:
            month_items.append(ordered[pos])
            pos += 1
        if prev_month_negative:
            month_items.append((mk, min(3, mlen), -1_500, Category.OVERDRAFT_FEE, "OVERDRAFT FEE"))
            month_items.sort(key=lambda it: it[1])  # python sort is stable
        went_negative = False
        for _mk, dom, amount, cat, desc in month_items:
            balance += amount
            went_negative = went_negative or balance < 0
            txns.append(
                Transaction(account_id, _date(mk, dom), amount, desc, cat, balance)
            )
        target = int(rng.normal(persona.balance_target, persona.balance_band_sd))
        steer = target - balance
        if abs(steer) >= 100:
            balance += steer
            txns.append(
                Transaction(
                    account_id,
                    _date(mk, mlen),
                    steer,
                    "ACCOUNT SWEEP TRANSFER",
                    Category.INTERNAL_TRANSFERS,
                    balance,
                )
            )
        prev_month_negative = went_negative

    history = history_from_transactions(
        account_id, txns, GivenDemographics(gender=gender, age=age)
    )
    truth = GroundTruth(account_id, persona.name, gender, age, disability, carer, has_child)
    return history, truth


def generate_cohort(
    config: CohortConfig, personas: Optional[Sequence[PersonaSpec]] = None
) -> Tuple[List[AccountHistory], List[GroundTruth]]:
    """Deterministic cohort for (seed, config, personas); every account
    passes the six-month / ten-transactions-per-month eligibility screen."""
    personas = list(personas) if personas is not None else default_personas()
    problems = config.validate()
    for p in personas:
        problems.extend(p.validate())
    weights = np.array([p.mix_weight for p in personas], dtype=np.float64)
    if abs(weights.sum() - 1.0) > 1e-9:
        problems.append(f"mix weights sum to {weights.sum()!r}, expected 1")
    if problems:
        raise SynthConfigError("; ".join(problems))
    streams = substream(config.seed, "synthgen").spawn(config.n_accounts)
    histories: List[AccountHistory] = []
    truths: List[GroundTruth] = []
    width = max(6, len(str(config.n_accounts)))
    for i in range(config.n_accounts):
        account_id = f"A{i:0{width}d}"
        h, t = generate_account(account_id, streams[i], personas, weights, config)
        histories.append(h)
        truths.append(t)
    return histories, truths


def write_ground_truth(truths: Iterable[GroundTruth], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(GROUND_TRUTH_HEADER)
        for t in truths:
            writer.writerow(t.row())


def read_ground_truth(path: Union[str, Path]) -> List[GroundTruth]:
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != GROUND_TRUTH_HEADER:
            raise ValueError(f"bad ground-truth header {header!r}")
        for rec in reader:
            out.append(
                GroundTruth(
                    account_id=rec[0],
                    persona=rec[1],
                    gender=rec[2],
                    age=int(rec[3]),
                    disability=rec[4] == "1",
                    carer=rec[5] == "1",
                    has_child=rec[6] == "1",
                )
            )
    return out


def generate_to_files(
    config: CohortConfig,
    out_dir: Union[str, Path],
    personas: Optional[Sequence[PersonaSpec]] = None,
) -> Tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    histories, truths = generate_cohort(config, personas)
    tx_path = out_dir / "transactions.csv"
    gt_path = out_dir / "ground_truth.csv"

    def all_txns():
        for h in histories:
            yield from h.transactions()

    write_transactions_csv(all_txns(), tx_path)
    write_ground_truth(truths, gt_path)
    return tx_path, gt_path


# ---------------------------------------------------------------------------
# Cohort description

_DESCRIBE_METRICS = [
    "income_monthly",
    "salary_monthly",
    "spend_total_monthly",
    "balance_mean_monthly",
    "gambling_out_monthly",
    "benefits_monthly",
    "od_days_monthly",
    "txns_per_month",
]


def describe_cohort(
    histories: Sequence[AccountHistory], truths: Sequence[GroundTruth]
) -> List[dict]:
    """Mean and SD of headline metrics per persona, straight from the
    transaction arrays.  Rows are ordered by persona name."""
    if not histories:
        raise ValueError("empty cohort")
    by_persona: Dict[str, List[Dict[str, float]]] = {}
    truth_by_id = {t.account_id: t for t in truths}
    for h in histories:
        agg = HistoryAggregates(h)
        months = agg.n_months
        benefit_total = sum(agg.category_total(c, outflow=False) for c in
                            [Category("benefit_" + s) for s in _BENEFIT_DESCS])
        n_od_days, _m1, _m2 = agg.od_profile()
        metrics = {
            "income_monthly": float(agg.income_by_month.sum()) / months,
            "salary_monthly": float(agg.salary_by_month.sum()) / months,
            "spend_total_monthly": float(agg.total_by_month.sum()) / months,
            "balance_mean_monthly": float(agg.balance_stats()[1].mean()),
            "gambling_out_monthly": float(agg.outflow_amount[agg.gambling_mask].sum()) / months,
            "benefits_monthly": benefit_total / months,
            "od_days_monthly": n_od_days / months,
            "txns_per_month": len(h) / months,
        }
        persona = truth_by_id[h.account_id].persona
        by_persona.setdefault(persona, []).append(metrics)
    rows = []
    for persona in sorted(by_persona):
        entries = by_persona[persona]
        row = {"persona": persona, "n_accounts": len(entries)}
        for metric in _DESCRIBE_METRICS:
            vals = np.array([e[metric] for e in entries], dtype=np.float64)
            row[f"{metric}_mean"] = float(vals.mean())
            row[f"{metric}_sd"] = float(vals.std())
        rows.append(row)
    return rows


def write_describe_csv(rows: List[dict], path: Union[str, Path]) -> None:
    if not rows:
        raise ValueError("empty cohort")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = list(rows[0])
        writer.writerow(header)
        for row in rows:
            writer.writerow([row[k] for k in header])

