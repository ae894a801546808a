"""Joint tagger: one sequence model scoring token labels on interior
positions and the utterance intent at the begin/end pseudo-positions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..autodiff import Tape, Tensor
from ..corpus import FUSED_LABELS, INTENTS, Utterance, fuse_token_label, require_tokens
from ..embeddings import BOU, EOU, EmbeddingMatrix, Vocab, indices_for
from ..metrics import weighted_f1
from ..recurrent import CellParams, bi_encode_raw, init_cell
from ..rng import SeedStream
from .base import EmbeddingResources, Hyper, check_corpus, fit, init_projection, softmax_rows
from .taggers import _encode_on_tape

INTENT_ZONE = (0, len(INTENTS))
TOKEN_ZONE = (len(INTENTS), len(INTENTS) + len(FUSED_LABELS))


@dataclass
class JointModel:
    vocab: Vocab
    emb: EmbeddingMatrix
    fwd: CellParams
    bwd: CellParams
    out_w: np.ndarray  # (|intents| + |fused token labels|, 2H)
    out_b: np.ndarray
    intent_labels: tuple[str, ...]
    token_labels: tuple[str, ...]
    hyper: Hyper

    @property
    def label_space(self) -> int:
        return len(self.intent_labels) + len(self.token_labels)

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


def fused_targets(u: Utterance) -> list[int]:
    return [FUSED_LABELS.index(fuse_token_label(s, k))
            for s, k in zip(u.slot_tags, u.keyword_tags)]


def joint_loss(tape: Tape, model: JointModel, leaves: dict[str, Tensor],
               indices: Sequence[int], intent_id: int, token_targets: Sequence[int],
               drop_gen, training: bool) -> Tensor:
    """Summed cross-entropy with positions masked to their legal label zone."""
    enc = _encode_on_tape(tape, model, leaves, indices, drop_gen, training=training)
    wl = leaves.setdefault("out.w", tape.leaf(model.out_w))
    bl = leaves.setdefault("out.b", tape.leaf(model.out_b))
    logits = tape.affine(enc, wl, bl)
    last = len(indices) - 1
    zones = [
        ([0, last], INTENT_ZONE[0], INTENT_ZONE[1], [intent_id, intent_id]),
        (list(range(1, last)), TOKEN_ZONE[0], TOKEN_ZONE[1], list(token_targets)),
    ]
    return tape.zone_cross_entropy(logits, zones)


def train_joint(corpus: Sequence[Utterance], resources: EmbeddingResources,
                hyper: Hyper, seed: int = 0,
                reduced_inputs: Sequence[tuple[list[str], list[int]]] | None = None
                ) -> JointModel:
    """Each sequence is wrapped in begin/end pseudo-tokens carrying the
    intent target; interior positions carry fused token labels.

    ``reduced_inputs`` substitutes (tokens, fused target ids) pairs for the
    corpus annotations, used by the hierarchical pipeline's second stage.
    """
    check_corpus(corpus)
    stream = SeedStream(seed, ("joint",))
    init = stream.split("init")
    emb = resources.emb.copy()
    fwd = init_cell("lstm", emb.dim, hyper.hidden_dim, init.split("fwd"))
    bwd = init_cell("lstm", emb.dim, hyper.hidden_dim, init.split("bwd"))
    out_w, out_b = init_projection(len(INTENTS) + len(FUSED_LABELS),
                                   2 * hyper.hidden_dim, init)
    model = JointModel(resources.vocab, emb, fwd, bwd, out_w, out_b,
                       INTENTS, FUSED_LABELS, hyper)
    intent_index = {label: i for i, label in enumerate(INTENTS)}

    examples = []
    for pos, u in enumerate(corpus):
        if reduced_inputs is not None:
            tokens, token_tgts = reduced_inputs[pos]
        else:
            tokens, token_tgts = u.tokens, fused_targets(u)
        idx = [BOU] + indices_for(model.vocab, tokens) + [EOU]
        examples.append((idx, intent_index[u.intent], token_tgts, tokens, u))

    def step(tape: Tape, leaves: dict[str, Tensor], example, drop_gen) -> Tensor:
        idx, intent_id, token_tgts, _, _ = example
        return joint_loss(tape, model, leaves, idx, intent_id, token_tgts,
                          drop_gen, training=True)

    def monitor(split) -> float:
        gold_i, pred_i, gold_t, pred_t = [], [], [], []
        for _, intent_id, token_tgts, tokens, _ in split:
            intent, labels = joint_predict(model, tokens)
            gold_i.append(INTENTS[intent_id])
            pred_i.append(intent)
            gold_t.extend(FUSED_LABELS[t] for t in token_tgts)
            pred_t.extend(labels)
        intent_f1 = weighted_f1(gold_i, pred_i, INTENTS)
        token_f1 = weighted_f1(gold_t, pred_t, FUSED_LABELS)
        return min(intent_f1, token_f1)

    fit(examples, model.trainable_params(), step, monitor, hyper, stream.split("fit"))
    return model


def joint_scores(model: JointModel, tokens: Sequence[str]
                 ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(bou intent probs, eou intent probs, interior token-label probs)."""
    require_tokens(list(tokens))
    idx = [BOU] + indices_for(model.vocab, tokens) + [EOU]
    xs = model.emb.matrix[idx]
    enc = bi_encode_raw(model.fwd, model.bwd, xs)
    logits = enc @ model.out_w.T + model.out_b
    lo, hi = INTENT_ZONE
    tlo, thi = TOKEN_ZONE
    bou = softmax_rows(logits[0, lo:hi])
    eou = softmax_rows(logits[-1, lo:hi])
    token_probs = softmax_rows(logits[1:-1, tlo:thi])
    return bou, eou, token_probs


def decode_intent(bou: np.ndarray, eou: np.ndarray, labels: Sequence[str]
                  ) -> tuple[str, float]:
    """Agreeing argmaxes win outright; otherwise the higher-probability
    position decides, with exact ties going to the end position."""
    bi, ei = int(bou.argmax()), int(eou.argmax())
    if bi == ei:
        return labels[bi], float(max(bou[bi], eou[ei]))
    if bou[bi] > eou[ei]:
        return labels[bi], float(bou[bi])
    return labels[ei], float(eou[ei])


def joint_predict(model: JointModel, tokens: Sequence[str]) -> tuple[str, list[str]]:
    bou, eou, token_probs = joint_scores(model, tokens)
    intent, _ = decode_intent(bou, eou, model.intent_labels)
    return intent, [model.token_labels[i] for i in token_probs.argmax(axis=1)]


def joint_predict_full(model: JointModel, tokens: Sequence[str]
                       ) -> tuple[str, float, list[str]]:
    bou, eou, token_probs = joint_scores(model, tokens)
    intent, confidence = decode_intent(bou, eou, model.intent_labels)
    return intent, confidence, [model.token_labels[i] for i in token_probs.argmax(axis=1)]
