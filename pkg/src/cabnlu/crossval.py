"""K-fold cross-validation over the ten model specifications.

Every fold trains from its training split alone (fresh vocab when no
external embeddings are supplied, fresh frequency tables for the hybrid
specs) and is fingerprinted with a hash of its training inputs so leaks
are detectable after the fact.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Sequence

from .corpus import INTENTS, KEYWORDS, SLOTS, Utterance, kfold_split, write_corpus
from .errors import ConfigError
from .metrics import ClassMetrics, score
from .models import (
    KEYWORDS_AND_SLOTS,
    KEYWORDS_ONLY,
    EmbeddingResources,
    Hyper,
    classify,
    hierarchical_predict,
    hybrid_predict,
    joint_predict,
    tag,
    train_hierarchical,
    train_hybrid,
    train_joint,
    train_seq2one,
    train_tagger,
)
from .rng import SeedStream


@dataclass
class SpecDef:
    name: str
    level: str  # "token" or "utterance"
    labels: tuple[str, ...]
    train: Callable
    predict: Callable
    gold: Callable


SPECS: dict[str, SpecDef] = {}


def _spec(name: str, level: str, labels, train, predict, gold) -> None:
    SPECS[name] = SpecDef(name, level, tuple(labels), train, predict, gold)


_spec("slot_tagger", "token", SLOTS,
      lambda c, r, h, s: train_tagger(c, "slot", r, h, s),
      lambda m, u: tag(m, u.tokens)[0],
      lambda u: u.slot_tags)
_spec("keyword_tagger", "token", KEYWORDS,
      lambda c, r, h, s: train_tagger(c, "keyword", r, h, s),
      lambda m, u: tag(m, u.tokens)[0],
      lambda u: u.keyword_tags)
_spec("separate1", "utterance", INTENTS,
      lambda c, r, h, s: train_seq2one(c, False, r, h, s),
      lambda m, u: classify(m, u.tokens)[0],
      lambda u: u.intent)
_spec("separate2", "utterance", INTENTS,
      lambda c, r, h, s: train_seq2one(c, True, r, h, s),
      lambda m, u: classify(m, u.tokens)[0],
      lambda u: u.intent)
_spec("joint", "utterance", INTENTS,
      lambda c, r, h, s: train_joint(c, r, h, s),
      lambda m, u: joint_predict(m, u.tokens)[0],
      lambda u: u.intent)
_spec("hybrid1", "utterance", INTENTS,
      lambda c, r, h, s: train_hybrid(c, KEYWORDS_ONLY, r, h, s),
      lambda m, u: hybrid_predict(m, u.tokens).intent,
      lambda u: u.intent)
_spec("hybrid2", "utterance", INTENTS,
      lambda c, r, h, s: train_hybrid(c, KEYWORDS_AND_SLOTS, r, h, s),
      lambda m, u: hybrid_predict(m, u.tokens).intent,
      lambda u: u.intent)
_spec("hier_separate1", "utterance", INTENTS,
      lambda c, r, h, s: train_hierarchical(c, "separate1", r, h, s),
      lambda m, u: hierarchical_predict(m, u.tokens).intent,
      lambda u: u.intent)
_spec("hier_separate2", "utterance", INTENTS,
      lambda c, r, h, s: train_hierarchical(c, "separate2", r, h, s),
      lambda m, u: hierarchical_predict(m, u.tokens).intent,
      lambda u: u.intent)
_spec("hier_joint", "utterance", INTENTS,
      lambda c, r, h, s: train_hierarchical(c, "joint", r, h, s),
      lambda m, u: hierarchical_predict(m, u.tokens).intent,
      lambda u: u.intent)


@dataclass
class FoldResult:
    fold: int
    train_hash: str
    test_ids: list[int]
    classes: list[ClassMetrics]
    weighted_f1: float
    freq_table_hash: str | None = None


@dataclass
class CvReport:
    task: str
    seed: int
    classes: list[ClassMetrics]
    weighted_f1: float
    folds: list[FoldResult]
    # run metadata; intentionally absent from the serialized document so
    # identical runs produce identical bytes
    hyper: Hyper | None = None
    timestamp: str | None = None


def _metrics_doc(classes: list[ClassMetrics]) -> list[dict]:
    return [{"label": c.label, "support": c.support, "precision": c.precision,
             "recall": c.recall, "f1": c.f1} for c in classes]


def report_to_json(report: CvReport) -> str:
    doc = {
        "task": report.task,
        "seed": report.seed,
        "classes": _metrics_doc(report.classes),
        "weighted_f1": report.weighted_f1,
        "folds": [
            {
                "fold": f.fold,
                "train_hash": f.train_hash,
                "test_ids": f.test_ids,
                "classes": _metrics_doc(f.classes),
                "weighted_f1": f.weighted_f1,
                **({"freq_table_hash": f.freq_table_hash} if f.freq_table_hash else {}),
            }
            for f in report.folds
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def pool_and_score(fold_outputs: Sequence[tuple[list[str], list[str]]],
                   labels: Sequence[str]) -> tuple[list[ClassMetrics], float]:
    """Micro aggregation: score the concatenation of all fold predictions."""
    gold: list[str] = []
    pred: list[str] = []
    for g, p in fold_outputs:
        gold.extend(g)
        pred.extend(p)
    return score(gold, pred, labels)


def run_cv(spec: str, corpus: list[Utterance], k: int, seed: int,
           hyper: Hyper | None = None,
           resources: EmbeddingResources | None = None,
           embedding_dim: int = 50) -> CvReport:
    """Train and evaluate one spec across k stratified folds.

    With no external embedding resources, each fold builds its vocabulary
    and random vectors from its own training split.
    """
    if spec not in SPECS:
        raise ConfigError(f"unknown model spec {spec!r}; expected one of {sorted(SPECS)}")
    sd = SPECS[spec]
    hyper = hyper or Hyper()
    folds = kfold_split(corpus, k, seed)
    stream = SeedStream(seed, ("cv", spec))

    fold_results: list[FoldResult] = []
    fold_outputs: list[tuple[list[str], list[str]]] = []
    for i, (train, test) in enumerate(folds):
        fold_stream = stream.split("fold", i)
        fold_resources = resources or EmbeddingResources.from_corpus(
            train, embedding_dim, fold_stream.split("emb").derived_seed())
        model = sd.train(train, fold_resources, hyper, fold_stream.derived_seed())
        gold: list[str] = []
        pred: list[str] = []
        for u in test:
            got = sd.predict(model, u)
            want = sd.gold(u)
            if sd.level == "token":
                gold.extend(want)
                pred.extend(got)
            else:
                gold.append(want)
                pred.append(got)
        classes, avg = score(gold, pred, sd.labels)
        freq_hash = None
        table = getattr(model, "table", None)
        if table is not None:
            freq_hash = _sha256(table.to_json())
        fold_results.append(FoldResult(
            fold=i,
            train_hash=_sha256(write_corpus(train)),
            test_ids=[u.id for u in test],
            classes=classes,
            weighted_f1=avg,
            freq_table_hash=freq_hash,
        ))
        fold_outputs.append((gold, pred))

    classes, weighted = pool_and_score(fold_outputs, sd.labels)
    return CvReport(
        task=spec,
        seed=seed,
        classes=classes,
        weighted_f1=weighted,
        folds=fold_results,
        hyper=hyper,
        timestamp=datetime.now(timezone.utc).isoformat(),
    )
