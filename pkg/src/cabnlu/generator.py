"""Grammar-based synthetic command corpus with gold tags by construction.

Templates are small token strings: ``*word`` marks an action keyword,
``{SlotType}`` draws a filler from that slot's lexicon, ``[word:SlotType]``
pins a literal token to a slot. Everything else is plain context. A
fraction of utterances receive distractor noise (synonym swaps or a
disfluency) so the learned taggers cannot simply memorize templates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import INTENTS, KW_INTENT, KW_NONE, NO_SLOT, SLOT_INDEX, Utterance
from .errors import ConfigError
from .rng import SeedStream

TEMPLATES: dict[str, tuple[str, ...]] = {
    "SetChangeDest": (
        "*take [me:Person] to {Location}",
        "*drive to {Location}",
        "*set *destination to {Location}",
        "*navigate to {Location}",
        "i want to *go to {Location}",
        "*head to {Location}",
    ),
    "SetChangeRoute": (
        "*change the *route",
        "*take a different *route",
        "*turn {Position} at the light",
        "*use the {Position} lane",
        "*reroute through {Location}",
        "*turn {Position} {TimeGuidance}",
    ),
    "GoFaster": (
        "*go *faster",
        "*speed *up",
        "*drive *faster",
        "*hurry *up",
        "*go *faster {TimeGuidance}",
        "can you *speed *up",
    ),
    "GoSlower": (
        "*slow *down",
        "*go *slower",
        "*drive *slower",
        "*ease *off",
        "*slow *down {TimeGuidance}",
        "can you *slow *down",
    ),
    "Stop": (
        "*stop the car",
        "please *stop",
        "*stop [here:Gesture]",
        "*stop {TimeGuidance}",
        "make a *stop",
        "*halt",
    ),
    "Park": (
        "*park the car",
        "*park [there:Gesture]",
        "*park near {Location}",
        "find a *parking spot",
        "*pull into that *parking lot",
        "*park {TimeGuidance}",
    ),
    "PullOver": (
        "*pull *over",
        "*pull *over [here:Gesture]",
        "*pull to the {Position}",
        "*pull *over {TimeGuidance}",
        "can you *pull *over",
    ),
    "DropOff": (
        "*drop [me:Person] *off",
        "*drop [me:Person] *off at {Location}",
        "*drop *off {Person} at {Location}",
        "*let [me:Person] *out",
        "*let [me:Person] *out [here:Gesture]",
    ),
    "OpenDoor": (
        "*open the [door:Object]",
        "*open the {Position} [door:Object]",
        "*unlock the [door:Object]",
        "can you *open the [door:Object]",
        "*open [my:Person] [door:Object]",
    ),
    "Other": (
        "*turn on the [music:Object]",
        "*turn off the {Object}",
        "*open the [window:Object]",
        "*open the [trunk:Object]",
        "*close the [trunk:Object]",
        "*turn up the [ac:Object]",
        "*show [me:Person] the [map:Object]",
        "*play some [music:Object]",
        "*roll down the [window:Object]",
        "*make it *warmer",
    ),
}

DEFAULT_LEXICONS: dict[str, tuple[str, ...]] = {
    "Location": ("downtown", "airport", "home", "station", "school", "mall",
                 "office", "hotel", "church", "library", "city hall", "main street"),
    "Position": ("left", "right", "front", "back"),
    "Person": ("him", "her", "us", "them", "john", "sarah", "alex", "everyone"),
    "Object": ("radio", "music", "lights", "heater", "screen", "wipers"),
    "TimeGuidance": ("now", "immediately", "soon", "asap", "today", "tonight", "later"),
    "Gesture": ("here", "there", "this", "that"),
}

PREFIXES = ("please", "hey", "ok", "well")
SUFFIX = "please"

SYNONYMS: dict[str, tuple[str, ...]] = {
    "car": ("vehicle", "ride"),
    "please": ("kindly",),
    "can": ("could",),
    "want": ("need",),
    "spot": ("space",),
}
DISFLUENCY = "um"


@dataclass
class GeneratorConfig:
    n: int
    seed: int
    intent_weights: dict[str, float] = field(
        default_factory=lambda: {label: (1.5 if label == "Other" else 1.0) for label in INTENTS})
    lexicons: dict[str, tuple[str, ...]] = field(default_factory=lambda: dict(DEFAULT_LEXICONS))
    noise_rate: float = 0.15
    politeness_rate: float = 0.3

    def validate(self) -> "GeneratorConfig":
        if self.n < 10:
            raise ConfigError(f"corpus size must be at least 10, got {self.n}")
        for label in INTENTS:
            if self.intent_weights.get(label, 0.0) <= 0.0:
                raise ConfigError(f"intent {label!r} needs a positive weight")
            if not TEMPLATES.get(label):
                raise ConfigError(f"intent {label!r} has no templates")
        for slot, fillers in self.lexicons.items():
            if slot not in SLOT_INDEX or slot == NO_SLOT:
                raise ConfigError(f"lexicon for unknown slot {slot!r}")
            if not fillers:
                raise ConfigError(f"empty lexicon for slot {slot!r}")
        if not 0.0 <= self.noise_rate <= 1.0 or not 0.0 <= self.politeness_rate <= 1.0:
            raise ConfigError("rates must lie in [0, 1]")
        return self


def _expand(template: str, lexicons: dict[str, tuple[str, ...]], gen
            ) -> tuple[list[str], list[str], list[str]]:
    tokens: list[str] = []
    slots: list[str] = []
    keywords: list[str] = []

    def push(token: str, slot: str, keyword: str) -> None:
        tokens.append(token)
        slots.append(slot)
        keywords.append(keyword)

    for piece in template.split():
        if piece.startswith("*"):
            push(piece[1:], NO_SLOT, KW_INTENT)
        elif piece.startswith("{") and piece.endswith("}"):
            slot = piece[1:-1]
            fillers = lexicons[slot]
            filler = fillers[int(gen.integers(len(fillers)))]
            for word in filler.split():
                push(word, slot, KW_NONE)
        elif piece.startswith("[") and piece.endswith("]"):
            word, slot = piece[1:-1].split(":")
            push(word, slot, KW_NONE)
        else:
            push(piece, NO_SLOT, KW_NONE)
    return tokens, slots, keywords


def generate_corpus(config: GeneratorConfig) -> list[Utterance]:
    """Sample n tagged utterances; deterministic for a given seed."""
    config.validate()
    gen = SeedStream(config.seed, ("generator",)).generator()
    weights = [config.intent_weights[label] for label in INTENTS]
    total = sum(weights)
    probs = [w / total for w in weights]

    out: list[Utterance] = []
    for uid in range(config.n):
        intent = INTENTS[int(gen.choice(len(INTENTS), p=probs))]
        templates = TEMPLATES[intent]
        template = templates[int(gen.integers(len(templates)))]
        tokens, slots, keywords = _expand(template, config.lexicons, gen)

        if gen.random() < config.politeness_rate:
            if gen.random() < 0.5:
                word = PREFIXES[int(gen.integers(len(PREFIXES)))]
                tokens.insert(0, word)
                slots.insert(0, NO_SLOT)
                keywords.insert(0, KW_NONE)
            else:
                tokens.append(SUFFIX)
                slots.append(NO_SLOT)
                keywords.append(KW_NONE)

        if gen.random() < config.noise_rate:
            swappable = [i for i, (t, s, k) in enumerate(zip(tokens, slots, keywords))
                         if t in SYNONYMS and s == NO_SLOT and k == KW_NONE]
            if swappable:
                i = swappable[int(gen.integers(len(swappable)))]
                options = SYNONYMS[tokens[i]]
                tokens[i] = options[int(gen.integers(len(options)))]
            else:
                tokens.insert(0, DISFLUENCY)
                slots.insert(0, NO_SLOT)
                keywords.insert(0, KW_NONE)

        out.append(Utterance(uid, tokens, slots, keywords, intent).validate())
    return out


def corpus_tokens(utterances: list[Utterance]) -> list[str]:
    """Sorted unique tokens, handy for building toy embedding files."""
    seen = {t for u in utterances for t in u.tokens}
    return sorted(seen)


def write_toy_vectors(tokens: list[str], dim: int, seed: int) -> str:
    """A GloVe-style text block with seeded random vectors for each token."""
    gen = SeedStream(seed, ("toy-vectors",)).generator()
    lines = []
    for tok in tokens:
        vec = gen.normal(0, 0.4, dim)
        lines.append(tok + " " + " ".join(f"{v:.5f}" for v in vec))
    return "\n".join(lines) + "\n"
