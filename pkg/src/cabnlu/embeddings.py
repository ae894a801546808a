"""Vocabulary and pretrained word-vector loading (whitespace text format).

Reserved indices: 0=PAD, 1=UNK, 2=BOU, 3=EOU. All tokens are case-folded.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from .autodiff import Tape, Tensor
from .errors import FormatError
from .rng import SeedStream

log = logging.getLogger(__name__)

PAD, UNK, BOU, EOU = 0, 1, 2, 3
RESERVED = ("<pad>", "<unk>", "<bou>", "<eou>")


@dataclass
class Vocab:
    token_to_id: dict[str, int]
    id_to_token: list[str]
    duplicates_skipped: int = 0

    def __len__(self) -> int:
        return len(self.id_to_token)

    def index(self, token: str) -> int:
        return self.token_to_id.get(token.lower(), UNK)

    @classmethod
    def from_tokens(cls, tokens: Iterable[str]) -> "Vocab":
        id_to_token = list(RESERVED)
        token_to_id = {t: i for i, t in enumerate(RESERVED)}
        for raw in tokens:
            tok = raw.lower()
            if tok in token_to_id:
                continue
            token_to_id[tok] = len(id_to_token)
            id_to_token.append(tok)
        return cls(token_to_id, id_to_token, 0)


@dataclass
class EmbeddingMatrix:
    matrix: np.ndarray  # (V, d)
    dim: int
    trainable: bool = True

    def copy(self) -> "EmbeddingMatrix":
        return EmbeddingMatrix(self.matrix.copy(), self.dim, self.trainable)


def load_vectors(reader: TextIO | Iterable[str], expected_dim: int,
                 seed: int = 0) -> tuple[Vocab, EmbeddingMatrix]:
    """Parse `token v1 ... vd` lines into a vocab and embedding matrix.

    Vocab order follows the file after the four reserved slots. The UNK
    row is the mean of all loaded vectors, PAD is zero, and BOU/EOU are
    random (seeded). Duplicate tokens keep their first vector.
    """
    tokens: list[str] = []
    vectors: list[np.ndarray] = []
    seen: dict[str, int] = {}
    duplicates = 0
    line_no = 0
    for line_no, line in enumerate(reader, start=1):
        parts = line.rstrip("\n").split()
        if not parts:
            continue
        token = parts[0].lower()
        values = parts[1:]
        if len(values) != expected_dim:
            raise FormatError(
                f"line {line_no}: expected {expected_dim} vector values, got {len(values)}")
        if token in seen:
            duplicates += 1
            continue
        seen[token] = len(tokens)
        tokens.append(token)
        vectors.append(np.asarray([float(v) for v in values]))
    if not tokens:
        raise FormatError("empty embedding file")
    if duplicates:
        log.warning("skipped %d duplicate embedding tokens", duplicates)

    loaded = np.stack(vectors)
    matrix = np.zeros((len(tokens) + len(RESERVED), expected_dim))
    matrix[UNK] = loaded.mean(axis=0)
    stream = SeedStream(seed, ("embeddings",))
    matrix[BOU] = stream.split("bou").generator().normal(0, 0.1, expected_dim)
    matrix[EOU] = stream.split("eou").generator().normal(0, 0.1, expected_dim)
    matrix[len(RESERVED):] = loaded

    id_to_token = list(RESERVED) + tokens
    vocab = Vocab({t: i for i, t in enumerate(id_to_token)}, id_to_token, duplicates)
    return vocab, EmbeddingMatrix(matrix, expected_dim)


def random_embeddings(vocab: Vocab, dim: int, seed: int = 0) -> EmbeddingMatrix:
    """Seeded random matrix for training without pretrained vectors; PAD stays zero."""
    gen = SeedStream(seed, ("embeddings", "random")).generator()
    matrix = gen.normal(0, 0.1, (len(vocab), dim))
    matrix[PAD] = 0.0
    return EmbeddingMatrix(matrix, dim)


def token_to_index(vocab: Vocab, token: str) -> int:
    """Case-folded lookup; unknown tokens map to UNK."""
    return vocab.index(token)


def indices_for(vocab: Vocab, tokens: Sequence[str]) -> list[int]:
    return [vocab.index(t) for t in tokens]


def embed(tape: Tape, matrix: Tensor, indices: Sequence[int]) -> Tensor:
    """Row gather onto the tape; (T, d) output."""
    return tape.gather_rows(matrix, indices)
