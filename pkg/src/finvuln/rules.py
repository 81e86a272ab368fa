"""Keyword rules for enriching transaction references.

Matching is case-insensitive substring containment after whitespace
normalization.  The shipped term lists are representative UK merchant
and provider names; replace them with a domain list via a plain-text
rules file ("class: term" per line, see :func:`load_rules`).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, List, Tuple, Union

PROVIDER_CLASSES = (
    "traditional_card",
    "nontraditional_card",
    "traditional_loan",
    "nontraditional_loan",
    "payday",
)

_WS = re.compile(r"\s+")


def normalize_reference(text: str) -> str:
    return _WS.sub(" ", text.strip()).lower()


@dataclass(frozen=True)
class KeywordRuleSet:
    """Immutable keyword lists; shareable across workers.

    All terms must be non-empty and lowercase, and no term may appear in
    two provider classes.  ``nonsalary`` holds mobile-transfer style
    markers that disqualify an inflow from salary status (gambling terms
    disqualify as well).
    """

    gambling: Tuple[str, ...]
    traditional_card: Tuple[str, ...]
    nontraditional_card: Tuple[str, ...]
    traditional_loan: Tuple[str, ...]
    nontraditional_loan: Tuple[str, ...]
    payday: Tuple[str, ...]
    bnpl: Tuple[str, ...]
    nonsalary: Tuple[str, ...]
    benefits: Dict[str, Tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        seen: Dict[str, str] = {}
        for klass in PROVIDER_CLASSES:
            for term in getattr(self, klass):
                if term in seen:
                    raise ValueError(
                        f"term {term!r} appears in both {seen[term]!r} and {klass!r}"
                    )
                seen[term] = klass
        for klass, terms in self._all_classes():
            for term in terms:
                if not term:
                    raise ValueError(f"empty term in class {klass!r}")
                if term != term.lower() or term != _WS.sub(" ", term.strip()):
                    raise ValueError(f"term {term!r} in {klass!r} is not normalized")
        object.__setattr__(self, "_cache", {})
        object.__setattr__(self, "_matchers", self._compile())

    def _all_classes(self):
        for klass in (
            "gambling",
            "traditional_card",
            "nontraditional_card",
            "traditional_loan",
            "nontraditional_loan",
            "payday",
            "bnpl",
            "nonsalary",
        ):
            yield klass, getattr(self, klass)
        for subtype, terms in self.benefits.items():
            yield f"benefit:{subtype}", terms

    def _compile(self):
        matchers = {}
        for klass, terms in self._all_classes():
            if terms:
                pattern = re.compile("|".join(re.escape(t) for t in terms))
                matchers[klass] = (pattern, terms)
        return matchers

    def classify_detailed(self, description: str) -> Dict[str, FrozenSet[str]]:
        """All matching classes with the exact terms that matched."""
        text = normalize_reference(description)
        cache = self._cache
        hit = cache.get(text)
        if hit is not None:
            return hit
        out = {}
        for klass, (pattern, terms) in self._matchers.items():
            if pattern.search(text):
                matched = frozenset(t for t in terms if t in text)
                out[klass] = matched
        if len(cache) < 200_000:
            cache[text] = out
        return out

    def classify(self, description: str) -> FrozenSet[str]:
        """Matching class tags for one reference (possibly empty).

        "nonsalary" is an internal filter list, not a tag.
        """
        return frozenset(k for k in self.classify_detailed(description) if k != "nonsalary")

    def is_nonsalary_reference(self, description: str) -> bool:
        tags = self.classify_detailed(description)
        return "nonsalary" in tags or "gambling" in tags


def classify_reference(description: str, rules: KeywordRuleSet) -> FrozenSet[str]:
    """Tags for a transaction reference, e.g. {"gambling", "benefit:child"}."""
    return rules.classify(description)


DEFAULT_RULES = KeywordRuleSet(
    gambling=(
        "bet365",
        "betfair",
        "william hill",
        "ladbrokes",
        "paddy power",
        "coral",
        "sky bet",
        "betfred",
        "888 casino",
        "pokerstars",
        "national lottery",
        "grosvenor casino",
        "unibet",
        "betway",
        "gala bingo",
        "tombola",
    ),
    traditional_card=(
        "barclaycard",
        "capital one",
        "hsbc card",
        "mbna",
        "halifax card",
        "lloyds card",
        "santander card",
        "natwest card",
        "tesco bank card",
        "vanquis",
        "aqua card",
    ),
    nontraditional_card=(
        "monzo card",
        "starling card",
        "revolut card",
        "curve card",
        "zopa card",
        "jaja card",
        "118 118 card",
    ),
    traditional_loan=(
        "hsbc loan",
        "barclays loan",
        "lloyds loan",
        "santander loan",
        "natwest loan",
        "tsb loan",
        "halifax loan",
        "tesco bank loan",
    ),
    nontraditional_loan=(
        "zopa loan",
        "ratesetter",
        "lendable",
        "starling loan",
        "oakbrook",
        "likely loans",
        "monzo loan",
    ),
    payday=(
        "wonga",
        "quickquid",
        "lending stream",
        "mr lender",
        "cashfloat",
        "sunny loans",
        "moneyboat",
        "drafty",
    ),
    bnpl=(
        "klarna",
        "clearpay",
        "laybuy",
        "afterpay",
        "zilch",
    ),
    nonsalary=(
        "paym",
        "mobile transfer",
        "mb transfer",
        "monzo.me",
        "paypal",
        "pingit",
    ),
    benefits={
        "disability": ("dwp pip", "disability living", "dla payment", "attendance allowance"),
        "carer": ("carers allowance", "carer allowance"),
        "child": ("child benefit", "chb payment"),
        "child_tax_credit": ("child tax credit", "ctc payment"),
        "working_tax_credit": ("working tax credit", "wtc payment"),
        "universal_credit": ("universal credit", "dwp uc"),
        "employment_support": ("employment support", "esa payment"),
    },
)


def load_rules(source: Union[str, Path]) -> KeywordRuleSet:
    """Parse a plain-text rules file, one "class: term" per line.

    Benefit lines use "benefit:<subtype>: term".  Blank lines and lines
    starting with "#" are ignored.
    """
    lists: Dict[str, List[str]] = {
        "gambling": [],
        "traditional_card": [],
        "nontraditional_card": [],
        "traditional_loan": [],
        "nontraditional_loan": [],
        "payday": [],
        "bnpl": [],
        "nonsalary": [],
    }
    benefits: Dict[str, List[str]] = {}
    with open(source, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            klass, sep, term = line.partition(":")
            if not sep:
                raise ValueError(f"{source}:{lineno}: expected 'class: term'")
            klass = klass.strip()
            if klass == "benefit":
                subtype, sep, term = term.partition(":")
                if not sep:
                    raise ValueError(f"{source}:{lineno}: expected 'benefit:<subtype>: term'")
                benefits.setdefault(subtype.strip(), []).append(normalize_reference(term))
            elif klass in lists:
                lists[klass].append(normalize_reference(term))
            else:
                raise ValueError(f"{source}:{lineno}: unknown rule class {klass!r}")
    return KeywordRuleSet(
        benefits={k: tuple(v) for k, v in benefits.items()},
        **{k: tuple(v) for k, v in lists.items()},
    )


def write_rules(path: Union[str, Path], rules: KeywordRuleSet = DEFAULT_RULES) -> None:
    lines = []
    for klass, terms in rules._all_classes():
        for term in terms:
            lines.append(f"{klass}: {term}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
