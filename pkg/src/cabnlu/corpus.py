"""Annotation schema, tokenization, corpus TSV I/O, and fold splitting.

Corpus format: per utterance, a header line ``# id=<uint>\\tintent=<label>``,
one ``token<TAB>slot<TAB>keyword`` line per token, then exactly one blank
line. UTF-8, LF endings.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ConfigError, ContractError, DataError
from .rng import SeedStream

INTENTS = (
    "SetChangeDest", "SetChangeRoute", "GoFaster", "GoSlower", "Stop",
    "Park", "PullOver", "DropOff", "OpenDoor", "Other",
)
SLOTS = ("Location", "Position", "Person", "Object", "TimeGuidance", "Gesture", "None")
KEYWORDS = ("Intent", "NonIntent")

NO_SLOT = "None"
KW_INTENT = "Intent"
KW_NONE = "NonIntent"

INTENT_INDEX = {label: i for i, label in enumerate(INTENTS)}
SLOT_INDEX = {label: i for i, label in enumerate(SLOTS)}
KEYWORD_INDEX = {label: i for i, label in enumerate(KEYWORDS)}

_PUNCT = set(string.punctuation)


@dataclass
class Utterance:
    id: int
    tokens: list[str]
    slot_tags: list[str]
    keyword_tags: list[str]
    intent: str

    def validate(self) -> "Utterance":
        if not self.tokens:
            raise DataError(f"utterance {self.id}: empty token list")
        if not (len(self.tokens) == len(self.slot_tags) == len(self.keyword_tags)):
            raise DataError(
                f"utterance {self.id}: {len(self.tokens)} tokens vs "
                f"{len(self.slot_tags)} slot tags / {len(self.keyword_tags)} keyword tags")
        if self.intent not in INTENT_INDEX:
            raise DataError(f"utterance {self.id}: unknown intent {self.intent!r}")
        for tag in self.slot_tags:
            if tag not in SLOT_INDEX:
                raise DataError(f"utterance {self.id}: unknown slot label {tag!r}")
        for tag in self.keyword_tags:
            if tag not in KEYWORD_INDEX:
                raise DataError(f"utterance {self.id}: unknown keyword label {tag!r}")
        return self


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, detach edge ASCII punctuation."""
    out: list[str] = []
    for chunk in text.lower().split():
        lead: list[str] = []
        while chunk and chunk[0] in _PUNCT and len(chunk) > 1:
            lead.append(chunk[0])
            chunk = chunk[1:]
        trail: list[str] = []
        while chunk and chunk[-1] in _PUNCT and len(chunk) > 1:
            trail.append(chunk[-1])
            chunk = chunk[:-1]
        out.extend(lead)
        if chunk:
            out.append(chunk)
        out.extend(reversed(trail))
    return out


def parse_corpus(text: str | Iterable[str]) -> list[Utterance]:
    """Read the TSV corpus format; raises DataError with a line number."""
    lines = text.splitlines() if isinstance(text, str) else [l.rstrip("\n") for l in text]
    utterances: list[Utterance] = []
    seen_ids: set[int] = set()
    current: Utterance | None = None
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            if current is not None:
                utterances.append(current.validate())
                current = None
            continue
        if line.startswith("#"):
            if current is not None:
                raise DataError(f"line {line_no}: header inside an utterance block")
            fields = line[1:].strip().split("\t")
            if len(fields) != 2 or not fields[0].startswith("id=") or not fields[1].startswith("intent="):
                raise DataError(f"line {line_no}: malformed header {line!r}")
            try:
                uid = int(fields[0][3:])
            except ValueError:
                raise DataError(f"line {line_no}: bad id in header {line!r}") from None
            if uid < 0:
                raise DataError(f"line {line_no}: negative id {uid}")
            if uid in seen_ids:
                raise DataError(f"line {line_no}: duplicate id {uid}")
            seen_ids.add(uid)
            intent = fields[1][7:]
            if intent not in INTENT_INDEX:
                raise DataError(f"line {line_no}: unknown intent {intent!r}")
            current = Utterance(uid, [], [], [], intent)
            continue
        if current is None:
            raise DataError(f"line {line_no}: token line without an intent header")
        cols = line.split("\t")
        if len(cols) != 3:
            raise DataError(f"line {line_no}: expected 3 tab-separated columns, got {len(cols)}")
        token, slot, keyword = cols
        if slot not in SLOT_INDEX:
            raise DataError(f"line {line_no}: unknown slot label {slot!r}")
        if keyword not in KEYWORD_INDEX:
            raise DataError(f"line {line_no}: unknown keyword label {keyword!r}")
        current.tokens.append(token)
        current.slot_tags.append(slot)
        current.keyword_tags.append(keyword)
    if current is not None:
        utterances.append(current.validate())
    return utterances


def write_corpus(utterances: Iterable[Utterance]) -> str:
    """Inverse of parse_corpus: parse(write(c)) == c exactly."""
    blocks = []
    for u in utterances:
        lines = [f"# id={u.id}\tintent={u.intent}"]
        lines.extend(f"{t}\t{s}\t{k}" for t, s, k in zip(u.tokens, u.slot_tags, u.keyword_tags))
        blocks.append("\n".join(lines) + "\n\n")
    return "".join(blocks)


def kfold_split(corpus: list[Utterance], k: int, seed: int
                ) -> list[tuple[list[Utterance], list[Utterance]]]:
    """Stratified shuffled folds; test folds partition the corpus and
    differ in size by at most one."""
    if k < 2:
        raise ConfigError(f"k must be at least 2, got {k}")
    if k > len(corpus):
        raise ConfigError(f"k={k} exceeds corpus size {len(corpus)}")
    gen = SeedStream(seed, ("kfold",)).generator()
    by_intent: dict[str, list[int]] = {label: [] for label in INTENTS}
    for i, u in enumerate(corpus):
        by_intent[u.intent].append(i)
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for label in INTENTS:
        idx = by_intent[label]
        if not idx:
            continue
        order = gen.permutation(len(idx))
        for j, pos in enumerate(order):
            folds[(offset + j) % k].append(idx[pos])
        offset = (offset + len(idx)) % k
    pairs = []
    for f in range(k):
        test_idx = set(folds[f])
        train = [corpus[i] for i in range(len(corpus)) if i not in test_idx]
        test = [corpus[i] for i in sorted(test_idx)]
        pairs.append((train, test))
    return pairs


def fuse_token_label(slot: str, keyword: str) -> str:
    """One label per token: the slot type when present, else Intent for
    keyword tokens, else None."""
    if slot != NO_SLOT:
        return slot
    if keyword == KW_INTENT:
        return KW_INTENT
    return NO_SLOT


FUSED_LABELS = tuple(s for s in SLOTS if s != NO_SLOT) + (KW_INTENT, NO_SLOT)
FUSED_INDEX = {label: i for i, label in enumerate(FUSED_LABELS)}


def unfuse_token_label(label: str) -> tuple[str, str]:
    """Back out (slot, keyword) tags from a fused token label."""
    if label == KW_INTENT:
        return NO_SLOT, KW_INTENT
    return label, KW_NONE


def unfused_tags(labels: Sequence[str]) -> tuple[list[str], list[str]]:
    """Split a fused label sequence into parallel slot and keyword tag lists."""
    pairs = [unfuse_token_label(l) for l in labels]
    return [s for s, _ in pairs], [k for _, k in pairs]


def require_tokens(tokens: list[str]) -> None:
    if not tokens:
        raise ContractError("empty token sequence")
