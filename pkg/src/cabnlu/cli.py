"""Command line: generate, train, eval, predict, serve.

Exit codes: 0 success, 2 I/O failure, 64 usage error, 65 corpus parse
failure, 66 unreadable or wrong-version model file.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .corpus import INTENTS, parse_corpus, tokenize, unfused_tags, write_corpus
from .crossval import SPECS, run_cv, report_to_json
from .errors import CabnluError, ConfigError, DataError, FormatError
from .generator import GeneratorConfig, generate_corpus
from .models import (
    EmbeddingResources,
    HierarchicalPipeline,
    HybridPipeline,
    Hyper,
    IntentModel,
    JointModel,
    TaggerModel,
    classify,
    hierarchical_predict,
    hybrid_predict,
    joint_predict_full,
    tag,
)
from .persist import load_artifact, save_artifact
from .reports import STYLES, render_delimited, render_figure, render_report

EXIT_OK = 0
EXIT_IO = 2
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_FORMAT = 66


@dataclasses.dataclass
class RunConfig:
    seed: int = 7
    k: int = 10
    hidden_dim: int = 128
    attention_dim: int = 64
    dropout: float = 0.2
    learning_rate: float = 1e-3
    max_epochs: int = 100
    patience: int = 10
    embeddings: str | None = None
    embedding_dim: int = 100
    trainable_embeddings: bool = True

    def validate(self) -> "RunConfig":
        if self.k < 2:
            raise ConfigError(f"k must be at least 2, got {self.k}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        for name in ("hidden_dim", "attention_dim", "max_epochs", "patience", "embedding_dim"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive")
        return self

    def hyper(self) -> Hyper:
        return Hyper(
            hidden_dim=self.hidden_dim,
            attention_dim=self.attention_dim,
            dropout=self.dropout,
            learning_rate=self.learning_rate,
            max_epochs=self.max_epochs,
            patience=self.patience,
            train_embeddings=self.trainable_embeddings,
        )


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--hidden-dim", type=int, default=128)
    p.add_argument("--attention-dim", type=int, default=64)
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--max-epochs", type=int, default=100)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--embeddings", help="pretrained vector file (whitespace text format)")
    p.add_argument("--embedding-dim", type=int, default=100)
    p.add_argument("--freeze-embeddings", action="store_true",
                   help="do not fine-tune embedding vectors during training")


def _config_from(args, k: int = 10) -> RunConfig:
    return RunConfig(
        seed=args.seed, k=k,
        hidden_dim=args.hidden_dim, attention_dim=args.attention_dim,
        dropout=args.dropout, learning_rate=args.learning_rate,
        max_epochs=args.max_epochs, patience=args.patience,
        embeddings=args.embeddings, embedding_dim=args.embedding_dim,
        trainable_embeddings=not args.freeze_embeddings,
    ).validate()


def _load_corpus(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileNotFoundError(f"cannot read corpus {path}: {exc}") from exc
    return parse_corpus(text)


def _resources_for(config: RunConfig, corpus) -> EmbeddingResources:
    if config.embeddings:
        return EmbeddingResources.from_vector_file(
            config.embeddings, config.embedding_dim, config.seed)
    return EmbeddingResources.from_corpus(corpus, config.embedding_dim, config.seed)


def cmd_generate(args) -> int:
    corpus = generate_corpus(GeneratorConfig(n=args.n, seed=args.seed))
    try:
        Path(args.out).write_text(write_corpus(corpus), encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    histogram = {label: 0 for label in INTENTS}
    for u in corpus:
        histogram[u.intent] += 1
    print(f"wrote {len(corpus)} utterances to {args.out}")
    for label in INTENTS:
        print(f"  {label:16s} {histogram[label]}")
    return EXIT_OK


def cmd_train(args) -> int:
    if args.model not in SPECS:
        print(f"error: unknown model spec {args.model!r}; choose from {sorted(SPECS)}",
              file=sys.stderr)
        return EXIT_USAGE
    config = _config_from(args)
    corpus = _load_corpus(args.data)
    resources = _resources_for(config, corpus)
    artifact = SPECS[args.model].train(corpus, resources, config.hyper(), config.seed)
    try:
        save_artifact(artifact, args.out)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"trained {args.model} on {len(corpus)} utterances -> {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.model not in SPECS:
        print(f"error: unknown model spec {args.model!r}; choose from {sorted(SPECS)}",
              file=sys.stderr)
        return EXIT_USAGE
    if args.style not in STYLES:
        print(f"error: unknown style {args.style!r}; choose from {list(STYLES)}",
              file=sys.stderr)
        return EXIT_USAGE
    config = _config_from(args, k=args.k)
    corpus = _load_corpus(args.data)
    resources = _resources_for(config, corpus) if args.embeddings else None
    report = run_cv(args.model, corpus, config.k, config.seed, config.hyper(),
                    resources=resources, embedding_dim=config.embedding_dim)
    base = Path(args.report)
    if base.suffix == ".json":
        base = base.with_suffix("")
    table = render_report(report, args.style)
    try:
        base.parent.mkdir(parents=True, exist_ok=True)
        base.with_suffix(".json").write_text(report_to_json(report), encoding="utf-8")
        base.with_suffix(".txt").write_text(table, encoding="utf-8")
        base.with_suffix(".tsv").write_text(render_delimited(report), encoding="utf-8")
        if not args.no_figures:
            render_figure(report, args.style, str(base.with_suffix(".png")))
    except OSError as exc:
        print(f"error: cannot write report files: {exc}", file=sys.stderr)
        return EXIT_IO
    print(table, end="")
    print(f"weighted F1 {report.weighted_f1:.4f} over {config.k} folds -> "
          f"{base.with_suffix('.json')}")
    return EXIT_OK


def _prediction_payload(artifact, tokens: list[str]) -> dict:
    intent = None
    confidence = None
    slots: list[dict] = []
    keywords: list[dict] = []

    def tok_list(labels):
        return [{"token": t, "label": l} for t, l in zip(tokens, labels)]

    if isinstance(artifact, TaggerModel):
        labels, _ = tag(artifact, tokens)
        if artifact.task == "slot":
            slots = tok_list(labels)
        else:
            keywords = tok_list(labels)
    elif isinstance(artifact, IntentModel):
        intent, confidence, _ = classify(artifact, tokens)
    elif isinstance(artifact, JointModel):
        intent, confidence, fused = joint_predict_full(artifact, tokens)
        slot_tags, keyword_tags = unfused_tags(fused)
        slots = tok_list(slot_tags)
        keywords = tok_list(keyword_tags)
    elif isinstance(artifact, HierarchicalPipeline):
        result = hierarchical_predict(artifact, tokens)
        intent, confidence = result.intent, result.confidence
        slots = tok_list(result.slot_tags)
        keywords = tok_list(result.keyword_tags)
    elif isinstance(artifact, HybridPipeline):
        result = hybrid_predict(artifact, tokens)
        intent, confidence = result.intent, result.confidence
        keywords = tok_list(result.keyword_tags)
        if artifact.slot_tagger is not None:
            slots = tok_list(result.slot_tags)
    else:
        raise FormatError(f"cannot predict with {type(artifact).__name__}")
    return {"intent": intent, "confidence": confidence,
            "slots": slots, "keywords": keywords}


def cmd_predict(args) -> int:
    artifact = load_artifact(args.bundle)
    tokens = tokenize(args.text)
    if not tokens:
        print("error: empty input text", file=sys.stderr)
        return EXIT_USAGE
    payload = _prediction_payload(artifact, tokens)
    print(json.dumps(payload))
    return EXIT_OK


def cmd_serve(args) -> int:
    artifact = load_artifact(args.bundle)
    out = sys.stdout
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
            rid = request["id"]
            text = request["text"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            out.write(json.dumps({"id": None, "error": f"malformed request: {exc}"}) + "\n")
            out.flush()
            continue
        try:
            tokens = tokenize(text)
            if not tokens:
                raise DataError("empty text")
            payload = _prediction_payload(artifact, tokens)
        except CabnluError as exc:
            out.write(json.dumps({"id": rid, "error": str(exc)}) + "\n")
            out.flush()
            continue
        out.write(json.dumps({"id": rid, **payload}) + "\n")
        out.flush()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cabnlu",
        description="Train and serve in-cabin command understanding models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic annotated corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=3347)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train one model spec on a corpus file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="k-fold cross-validation with report files")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--report", required=True, help="output base path (writes .json/.txt/.tsv/.png)")
    p.add_argument("--style", default="intent_wise_table", choices=list(STYLES))
    p.add_argument("--no-figures", action="store_true")
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="one-shot prediction from a saved model or bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--text", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("serve", help="NDJSON request/response loop over stdio")
    p.add_argument("--bundle", required=True)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
