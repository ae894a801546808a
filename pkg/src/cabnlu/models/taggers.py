"""Bidirectional recurrent sequence taggers for slots and intent keywords."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..autodiff import Tape, Tensor
from ..corpus import KEYWORDS, SLOTS, Utterance, require_tokens
from ..embeddings import EmbeddingMatrix, Vocab, indices_for
from ..errors import ConfigError
from ..metrics import weighted_f1
from ..recurrent import CellParams, bi_encode, bi_encode_raw, init_cell, tape_cell
from ..rng import SeedStream
from .base import EmbeddingResources, Hyper, check_corpus, fit, init_projection, softmax_rows

TASK_LABELS = {"slot": SLOTS, "keyword": KEYWORDS}


@dataclass
class TaggerModel:
    task: str
    vocab: Vocab
    emb: EmbeddingMatrix
    fwd: CellParams
    bwd: CellParams
    out_w: np.ndarray
    out_b: np.ndarray
    labels: tuple[str, ...]
    hyper: Hyper

    @property
    def label_count(self) -> int:
        return len(self.labels)

    def params(self) -> dict[str, np.ndarray]:
        p = {"emb": self.emb.matrix, "out.w": self.out_w, "out.b": self.out_b}
        for prefix, cell in (("fwd.", self.fwd), ("bwd.", self.bwd)):
            for name, arr in cell.weights.items():
                p[prefix + name] = arr
        return p

    def trainable_params(self) -> dict[str, np.ndarray]:
        p = self.params()
        if not self.hyper.train_embeddings:
            del p["emb"]
        return p


def _new_tagger(task: str, resources: EmbeddingResources, hyper: Hyper,
                stream: SeedStream) -> TaggerModel:
    if task not in TASK_LABELS:
        raise ConfigError(f"unknown tagger task {task!r}")
    labels = TASK_LABELS[task]
    emb = resources.emb.copy()
    dim = emb.dim
    fwd = init_cell("lstm", dim, hyper.hidden_dim, stream.split("fwd"))
    bwd = init_cell("lstm", dim, hyper.hidden_dim, stream.split("bwd"))
    out_w, out_b = init_projection(len(labels), 2 * hyper.hidden_dim, stream)
    return TaggerModel(task, resources.vocab, emb, fwd, bwd, out_w, out_b, labels, hyper)


def _encode_on_tape(tape: Tape, model, leaves: dict[str, Tensor],
                    indices: Sequence[int], dropout_gen, training: bool) -> Tensor:
    """Embed + Bi-LSTM + dropout; registers all encoder leaves."""
    emb_leaf = leaves.get("emb")
    if emb_leaf is None:
        emb_leaf = tape.leaf(model.emb.matrix, requires_grad=model.hyper.train_embeddings)
        leaves["emb"] = emb_leaf
    taped_f = tape_cell(tape, model.fwd, leaves, prefix="fwd.")
    taped_b = tape_cell(tape, model.bwd, leaves, prefix="bwd.")
    xs = tape.gather_rows(emb_leaf, indices)
    enc = bi_encode(tape, xs, taped_f, taped_b)
    return tape.dropout(enc, model.hyper.dropout, dropout_gen, training=training)


def train_tagger(corpus: Sequence[Utterance], task: str, resources: EmbeddingResources,
                 hyper: Hyper, seed: int = 0) -> TaggerModel:
    """Per-token cross-entropy over the sequence, Adam, early stopping on
    held-out token-level weighted F1. Deterministic for a given seed."""
    check_corpus(corpus)
    stream = SeedStream(seed, ("tagger", task))
    model = _new_tagger(task, resources, hyper, stream.split("init"))
    label_index = {label: i for i, label in enumerate(model.labels)}

    examples = []
    for u in corpus:
        tags = u.slot_tags if task == "slot" else u.keyword_tags
        examples.append((indices_for(model.vocab, u.tokens),
                         [label_index[t] for t in tags], u))

    def step(tape: Tape, leaves: dict[str, Tensor], example, drop_gen) -> Tensor:
        idx, targets, _ = example
        enc = _encode_on_tape(tape, model, leaves, idx, drop_gen, training=True)
        wl = leaves.setdefault("out.w", tape.leaf(model.out_w))
        bl = leaves.setdefault("out.b", tape.leaf(model.out_b))
        logits = tape.affine(enc, wl, bl)
        return tape.seq_cross_entropy(logits, targets)

    def monitor(split) -> float:
        gold: list[str] = []
        pred: list[str] = []
        for idx, targets, u in split:
            labels, _ = tag(model, u.tokens)
            pred.extend(labels)
            gold.extend(model.labels[t] for t in targets)
        return weighted_f1(gold, pred, model.labels)

    fit(examples, model.trainable_params(), step, monitor, hyper, stream.split("fit"))
    return model


def tag_scores(model: TaggerModel, tokens: Sequence[str]) -> np.ndarray:
    """Per-token label probabilities, shape (T, L)."""
    require_tokens(list(tokens))
    xs = model.emb.matrix[indices_for(model.vocab, tokens)]
    enc = bi_encode_raw(model.fwd, model.bwd, xs)
    return softmax_rows(enc @ model.out_w.T + model.out_b)


def tag(model: TaggerModel, tokens: Sequence[str]) -> tuple[list[str], np.ndarray]:
    """Argmax labels (ties break to the lowest label index) plus probabilities."""
    probs = tag_scores(model, tokens)
    return [model.labels[i] for i in probs.argmax(axis=1)], probs
