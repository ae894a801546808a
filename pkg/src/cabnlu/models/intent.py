"""Whole-utterance intent classifiers (final-states or attention pooling)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..autodiff import Tape, Tensor
from ..corpus import INTENTS, Utterance, require_tokens
from ..embeddings import EmbeddingMatrix, Vocab, indices_for
from ..metrics import weighted_f1
from ..recurrent import (
    AttentionParams,
    CellParams,
    attention_pool,
    attention_pool_raw,
    bi_encode_raw,
    init_attention,
    init_cell,
)
from ..rng import SeedStream
from .base import EmbeddingResources, Hyper, check_corpus, fit, init_projection, softmax_rows
from .taggers import _encode_on_tape


@dataclass
class IntentModel:
    use_attention: bool
    vocab: Vocab
    emb: EmbeddingMatrix
    fwd: CellParams
    bwd: CellParams
    attn: AttentionParams | None
    out_w: np.ndarray
    out_b: np.ndarray
    labels: tuple[str, ...]
    hyper: Hyper

    def params(self) -> dict[str, np.ndarray]:
        p = {"emb": self.emb.matrix, "out.w": self.out_w, "out.b": self.out_b}
        for prefix, cell in (("fwd.", self.fwd), ("bwd.", self.bwd)):
            for name, arr in cell.weights.items():
                p[prefix + name] = arr
        if self.attn is not None:
            p["attn.w"] = self.attn.w
            p["attn.u"] = self.attn.u
        return p

    def trainable_params(self) -> dict[str, np.ndarray]:
        p = self.params()
        if not self.hyper.train_embeddings:
            del p["emb"]
        return p


def _final_states(enc: np.ndarray, hidden: int) -> np.ndarray:
    # forward direction ends at the last row, backward at the first
    return np.concatenate([enc[-1, :hidden], enc[0, hidden:]])


def train_seq2one(corpus: Sequence[Utterance], use_attention: bool,
                  resources: EmbeddingResources, hyper: Hyper, seed: int = 0) -> IntentModel:
    """Single cross-entropy target per utterance; monitor is utterance-level
    weighted F1 on the held-out slice."""
    check_corpus(corpus)
    stream = SeedStream(seed, ("seq2one", "attn" if use_attention else "final"))
    init = stream.split("init")
    emb = resources.emb.copy()
    fwd = init_cell("lstm", emb.dim, hyper.hidden_dim, init.split("fwd"))
    bwd = init_cell("lstm", emb.dim, hyper.hidden_dim, init.split("bwd"))
    attn = init_attention(hyper.attention_dim, 2 * hyper.hidden_dim,
                          init.split("attn")) if use_attention else None
    out_w, out_b = init_projection(len(INTENTS), 2 * hyper.hidden_dim, init)
    model = IntentModel(use_attention, resources.vocab, emb, fwd, bwd, attn,
                        out_w, out_b, INTENTS, hyper)
    intent_index = {label: i for i, label in enumerate(INTENTS)}
    examples = [(indices_for(model.vocab, u.tokens), intent_index[u.intent], u)
                for u in corpus]
    hidden = hyper.hidden_dim

    def step(tape: Tape, leaves: dict[str, Tensor], example, drop_gen) -> Tensor:
        idx, target, _ = example
        enc = _encode_on_tape(tape, model, leaves, idx, drop_gen, training=True)
        if model.use_attention:
            wa = leaves.setdefault("attn.w", tape.leaf(model.attn.w))
            ua = leaves.setdefault("attn.u", tape.leaf(model.attn.u))
            feature, _ = attention_pool(tape, enc, (wa, ua))
        else:
            last = tape.row(enc, len(idx) - 1)
            first = tape.row(enc, 0)
            feature = tape.concat([tape.slice1d(last, 0, hidden),
                                   tape.slice1d(first, hidden, 2 * hidden)])
        wl = leaves.setdefault("out.w", tape.leaf(model.out_w))
        bl = leaves.setdefault("out.b", tape.leaf(model.out_b))
        logits = tape.affine(feature, wl, bl)
        return tape.softmax_cross_entropy(logits, target)

    def monitor(split) -> float:
        gold = [u.intent for _, _, u in split]
        pred = [classify(model, u.tokens)[0] for _, _, u in split]
        return weighted_f1(gold, pred, INTENTS)

    fit(examples, model.trainable_params(), step, monitor, hyper, stream.split("fit"))
    return model


def intent_distribution(model: IntentModel, tokens: Sequence[str]
                        ) -> tuple[np.ndarray, np.ndarray | None]:
    """Intent probabilities and, when attention is used, its weights."""
    require_tokens(list(tokens))
    xs = model.emb.matrix[indices_for(model.vocab, tokens)]
    enc = bi_encode_raw(model.fwd, model.bwd, xs)
    weights = None
    if model.use_attention:
        feature, weights = attention_pool_raw(model.attn, enc)
    else:
        feature = _final_states(enc, model.hyper.hidden_dim)
    probs = softmax_rows(model.out_w @ feature + model.out_b)
    return probs, weights


def classify(model: IntentModel, tokens: Sequence[str]
             ) -> tuple[str, float, np.ndarray | None]:
    """Argmax intent, its probability, and attention weights if present."""
    probs, weights = intent_distribution(model, tokens)
    best = int(probs.argmax())
    return model.labels[best], float(probs[best]), weights
