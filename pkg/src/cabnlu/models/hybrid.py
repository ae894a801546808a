"""Term-frequency tables and the rule-based keyword/slot-to-intent mapper."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

from ..corpus import INTENTS, KW_INTENT, NO_SLOT, Utterance
from ..errors import ConfigError, DataError

KEYWORDS_ONLY = "keywords_only"
KEYWORDS_AND_SLOTS = "keywords_and_slots"
FALLBACK_INTENT = "Other"


@dataclass
class FreqTable:
    """Per-intent counts of keyword tokens and slot types, plus priors."""

    keyword_counts: dict[str, dict[str, int]] = field(
        default_factory=lambda: {i: {} for i in INTENTS})
    slot_counts: dict[str, dict[str, int]] = field(
        default_factory=lambda: {i: {} for i in INTENTS})
    priors: dict[str, int] = field(default_factory=lambda: {i: 0 for i in INTENTS})

    def to_json(self) -> str:
        doc = {"keyword_counts": self.keyword_counts,
               "slot_counts": self.slot_counts,
               "priors": self.priors}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "FreqTable":
        doc = json.loads(text)
        return cls(doc["keyword_counts"], doc["slot_counts"], doc["priors"])


def build_freq_table(corpus: Sequence[Utterance]) -> FreqTable:
    """Count Intent-tagged tokens and non-None slot types per intent."""
    if not corpus:
        raise DataError("empty corpus")
    table = FreqTable()
    for u in corpus:
        table.priors[u.intent] += 1
        kw = table.keyword_counts[u.intent]
        sl = table.slot_counts[u.intent]
        for token, slot, keyword in zip(u.tokens, u.slot_tags, u.keyword_tags):
            if keyword == KW_INTENT:
                kw[token] = kw.get(token, 0) + 1
            if slot != NO_SLOT:
                sl[slot] = sl.get(slot, 0) + 1
    return table


def hybrid_scores(table: FreqTable, keywords: Sequence[str], slots: Sequence[str],
                  mode: str = KEYWORDS_ONLY) -> dict[str, float]:
    """Per-intent sums of normalized term frequencies for the evidence."""
    if mode not in (KEYWORDS_ONLY, KEYWORDS_AND_SLOTS):
        raise ConfigError(f"unknown hybrid mode {mode!r}")
    scores = {intent: 0.0 for intent in INTENTS}
    for token in keywords:
        denom = sum(table.keyword_counts[i].get(token, 0) for i in INTENTS)
        if denom:
            for intent in INTENTS:
                scores[intent] += table.keyword_counts[intent].get(token, 0) / denom
    if mode == KEYWORDS_AND_SLOTS:
        for slot in slots:
            denom = sum(table.slot_counts[i].get(slot, 0) for i in INTENTS)
            if denom:
                for intent in INTENTS:
                    scores[intent] += table.slot_counts[intent].get(slot, 0) / denom
    return scores


def hybrid_map(table: FreqTable, keywords: Sequence[str], slots: Sequence[str],
               mode: str = KEYWORDS_ONLY) -> str:
    """Sum each evidence item's normalized term frequency per intent and
    take the argmax; ties break to the higher prior, then label order.
    No evidence at all falls back to the catch-all intent."""
    if mode not in (KEYWORDS_ONLY, KEYWORDS_AND_SLOTS):
        raise ConfigError(f"unknown hybrid mode {mode!r}")
    if not keywords and not (mode == KEYWORDS_AND_SLOTS and slots):
        return FALLBACK_INTENT
    scores = hybrid_scores(table, keywords, slots, mode)
    return min(INTENTS, key=lambda i: (-scores[i], -table.priors.get(i, 0), i))
