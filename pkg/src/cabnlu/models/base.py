"""Shared model plumbing: hyperparameters, embedding resources, training loop."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from ..autodiff import Tape, Tensor
from ..corpus import Utterance
from ..embeddings import EmbeddingMatrix, Vocab, load_vectors, random_embeddings
from ..errors import DataError
from ..optim import OptimizerState, optimizer_step
from ..rng import SeedStream


@dataclass
class Hyper:
    """Training configuration; defaults target the full synthetic corpus."""

    hidden_dim: int = 128
    attention_dim: int = 64
    dropout: float = 0.2
    learning_rate: float = 1e-3
    max_epochs: int = 100
    patience: int = 10
    holdout_fraction: float = 0.1
    target_f1: float | None = None
    train_embeddings: bool = True
    optimizer: str = "adam"

    def scaled(self, **overrides) -> "Hyper":
        return replace(self, **overrides)


@dataclass
class EmbeddingResources:
    """Vocabulary plus the embedding matrix template models copy at init."""

    vocab: Vocab
    emb: EmbeddingMatrix

    @classmethod
    def from_corpus(cls, utterances: Sequence[Utterance], dim: int, seed: int
                    ) -> "EmbeddingResources":
        vocab = Vocab.from_tokens(t for u in utterances for t in u.tokens)
        return cls(vocab, random_embeddings(vocab, dim, seed))

    @classmethod
    def from_vector_file(cls, path: str, dim: int, seed: int = 0) -> "EmbeddingResources":
        with open(path, encoding="utf-8") as fh:
            vocab, emb = load_vectors(fh, dim, seed)
        return cls(vocab, emb)


def check_corpus(corpus: Sequence[Utterance]) -> None:
    if not corpus:
        raise DataError("empty corpus")
    for u in corpus:
        u.validate()


def snapshot(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {name: arr.copy() for name, arr in params.items()}


def restore(params: dict[str, np.ndarray], saved: dict[str, np.ndarray]) -> None:
    for name, arr in params.items():
        arr[...] = saved[name]


def fit(train_set: list,
        params: dict[str, np.ndarray],
        step_fn: Callable[[Tape, dict[str, Tensor], object, np.random.Generator], Tensor],
        monitor_fn: Callable[[list], float],
        hyper: Hyper,
        stream: SeedStream) -> None:
    """Generic per-example training loop with early stopping.

    ``step_fn`` builds one example's loss on a fresh tape, registering
    parameter leaves into the dict it is given. ``monitor_fn`` scores the
    monitor split (held-out slice, or the training set itself when
    holdout_fraction is zero) with the current parameters.
    """
    n = len(train_set)
    n_hold = 0
    if hyper.holdout_fraction > 0.0 and n >= 2:
        n_hold = min(max(1, round(hyper.holdout_fraction * n)), n - 1)
    split_gen = stream.split("holdout").generator()
    order = split_gen.permutation(n)
    holdout = [train_set[i] for i in order[:n_hold]]
    inner = [train_set[i] for i in order[n_hold:]]

    shuffle_gen = stream.split("shuffle").generator()
    drop_gen = stream.split("dropout").generator()
    state = OptimizerState(kind=hyper.optimizer, learning_rate=hyper.learning_rate)

    best: dict[str, np.ndarray] | None = None
    best_f1 = -1.0
    stale = 0
    for _epoch in range(hyper.max_epochs):
        for i in shuffle_gen.permutation(len(inner)):
            tape = Tape()
            leaves: dict[str, Tensor] = {}
            loss = step_fn(tape, leaves, inner[i], drop_gen)
            grads_by_id = tape.backward(loss)
            grads = {name: grads_by_id.get(node.id) for name, node in leaves.items()}
            optimizer_step(params, grads, state)
        monitor = monitor_fn(holdout if holdout else inner)
        if monitor > best_f1 + 1e-12:
            best_f1 = monitor
            best = snapshot(params)
            stale = 0
        else:
            stale += 1
        if hyper.target_f1 is not None and monitor >= hyper.target_f1:
            best = None  # current params already meet the target
            break
        if holdout and stale >= hyper.patience:
            break
    if holdout and best is not None:
        restore(params, best)


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=-1, keepdims=True)
    e = np.exp(logits - m)
    return e / e.sum(axis=-1, keepdims=True)


def init_projection(out_dim: int, in_dim: int, stream: SeedStream
                    ) -> tuple[np.ndarray, np.ndarray]:
    bound = np.sqrt(1.0 / in_dim)
    w = stream.split("out", "w").generator().uniform(-bound, bound, (out_dim, in_dim))
    return w, np.zeros(out_dim)
