"""Versioned binary model files and bundle directories.

Layout: magic ``NLU1``, u16 format version, u32 manifest length, JSON
manifest (model kind, hyperparameters, label schema, vocab, tensor
directory), then contiguous little-endian float32 tensor data. Offsets
are relative to the payload start and 4-byte aligned. Compute happens in
float64; files store float32, and loading widens back, so a save/load
round trip is the canonical precision path.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingMatrix, Vocab
from .errors import FormatError
from .models import (
    FreqTable,
    HierarchicalPipeline,
    HybridPipeline,
    Hyper,
    IntentModel,
    JointModel,
    TaggerModel,
)
from .recurrent import AttentionParams, CellParams, GRU_GATES, LSTM_GATES

MAGIC = b"NLU1"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sHI")


def _cell_from_params(params: dict[str, np.ndarray], prefix: str) -> CellParams:
    gates = [g for g in LSTM_GATES if f"{prefix}w_{g}" in params]
    kind = "lstm" if len(gates) == 4 else "gru"
    names = LSTM_GATES if kind == "lstm" else GRU_GATES
    weights = {}
    for g in names:
        weights[f"w_{g}"] = params[f"{prefix}w_{g}"]
        weights[f"b_{g}"] = params[f"{prefix}b_{g}"]
    hidden, fan_in = weights["w_" + names[0]].shape
    return CellParams(kind, fan_in - hidden, hidden, weights)


def _manifest_for(model) -> dict:
    if isinstance(model, TaggerModel):
        extra = {"kind": "tagger", "task": model.task, "labels": list(model.labels)}
    elif isinstance(model, IntentModel):
        extra = {"kind": "intent", "use_attention": model.use_attention,
                 "labels": list(model.labels)}
    elif isinstance(model, JointModel):
        extra = {"kind": "joint", "intent_labels": list(model.intent_labels),
                 "token_labels": list(model.token_labels)}
    else:
        raise FormatError(f"cannot serialize object of type {type(model).__name__}")
    return {
        **extra,
        "hyper": dataclasses.asdict(model.hyper),
        "embedding_dim": model.emb.dim,
        "trainable_embeddings": model.emb.trainable,
        "vocab": model.vocab.id_to_token,
    }


def model_to_bytes(model) -> bytes:
    """Serialize one model to the single-file binary format."""
    manifest = _manifest_for(model)
    tensors = model.params()
    directory = {}
    blobs = []
    offset = 0
    for name in sorted(tensors):
        arr = tensors[name]
        blob = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        directory[name] = {"offset": offset, "shape": list(arr.shape)}
        blobs.append(blob)
        offset += len(blob)
        if offset % 4:  # all-f32 payloads stay aligned; guard anyway
            pad = 4 - offset % 4
            blobs.append(b"\0" * pad)
            offset += pad
    manifest["tensors"] = directory
    manifest_bytes = json.dumps(manifest, sort_keys=True).encode("utf-8")
    return _HEADER.pack(MAGIC, FORMAT_VERSION, len(manifest_bytes)) + manifest_bytes + b"".join(blobs)


def _read_tensors(manifest: dict, payload: bytes) -> dict[str, np.ndarray]:
    tensors = {}
    for name, entry in manifest["tensors"].items():
        offset = entry["offset"]
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if offset % 4:
            raise FormatError(f"tensor {name!r} offset {offset} is not 4-byte aligned")
        if end > len(payload):
            raise FormatError(f"tensor {name!r} extends past the payload end")
        tensors[name] = np.frombuffer(payload, dtype="<f4", count=count,
                                      offset=offset).astype(np.float64).reshape(shape)
    return tensors


def model_from_bytes(data: bytes):
    """Parse the binary format back into a model; float32 values widen to float64."""
    if len(data) < _HEADER.size:
        raise FormatError("model file too short for its header")
    magic, version, manifest_len = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic bytes {magic!r}; expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported model format version {version}")
    manifest_end = _HEADER.size + manifest_len
    if manifest_end > len(data):
        raise FormatError("manifest length exceeds file size")
    try:
        manifest = json.loads(data[_HEADER.size:manifest_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable manifest: {exc}") from None
    payload = data[manifest_end:]
    tensors = _read_tensors(manifest, payload)

    id_to_token = manifest["vocab"]
    vocab = Vocab({t: i for i, t in enumerate(id_to_token)}, list(id_to_token))
    emb = EmbeddingMatrix(tensors["emb"], manifest["embedding_dim"],
                          manifest["trainable_embeddings"])
    hyper = Hyper(**manifest["hyper"])
    fwd = _cell_from_params(tensors, "fwd.")
    bwd = _cell_from_params(tensors, "bwd.")
    kind = manifest["kind"]
    if kind == "tagger":
        return TaggerModel(manifest["task"], vocab, emb, fwd, bwd,
                           tensors["out.w"], tensors["out.b"],
                           tuple(manifest["labels"]), hyper)
    if kind == "intent":
        attn = None
        if manifest["use_attention"]:
            attn = AttentionParams(tensors["attn.w"], tensors["attn.u"])
        return IntentModel(manifest["use_attention"], vocab, emb, fwd, bwd, attn,
                           tensors["out.w"], tensors["out.b"],
                           tuple(manifest["labels"]), hyper)
    if kind == "joint":
        return JointModel(vocab, emb, fwd, bwd, tensors["out.w"], tensors["out.b"],
                          tuple(manifest["intent_labels"]),
                          tuple(manifest["token_labels"]), hyper)
    raise FormatError(f"unknown model kind {kind!r}")


def save_model(model, path: str | Path) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def load_model(path: str | Path):
    return model_from_bytes(Path(path).read_bytes())


# -- bundles ------------------------------------------------------------------

BUNDLE_INDEX = "bundle.json"


def save_artifact(artifact, path: str | Path) -> None:
    """Single models become one ``.nlu`` file; pipelines become a bundle
    directory with an index."""
    path = Path(path)
    if isinstance(artifact, (TaggerModel, IntentModel, JointModel)):
        save_model(artifact, path)
        return
    path.mkdir(parents=True, exist_ok=True)
    if isinstance(artifact, HybridPipeline):
        components = {"keyword_tagger": "keyword_tagger.nlu",
                      "freq_table": "freq_table.json"}
        save_model(artifact.keyword_tagger, path / "keyword_tagger.nlu")
        if artifact.slot_tagger is not None:
            components["slot_tagger"] = "slot_tagger.nlu"
            save_model(artifact.slot_tagger, path / "slot_tagger.nlu")
        (path / "freq_table.json").write_text(artifact.table.to_json(), encoding="utf-8")
        index = {"format": "cabnlu-bundle", "version": FORMAT_VERSION,
                 "kind": artifact.kind, "mode": artifact.mode, "components": components}
    elif isinstance(artifact, HierarchicalPipeline):
        components = {"slot_tagger": "slot_tagger.nlu",
                      "keyword_tagger": "keyword_tagger.nlu",
                      "stage2": "stage2.nlu"}
        save_model(artifact.slot_tagger, path / "slot_tagger.nlu")
        save_model(artifact.keyword_tagger, path / "keyword_tagger.nlu")
        save_model(artifact.stage2, path / "stage2.nlu")
        index = {"format": "cabnlu-bundle", "version": FORMAT_VERSION,
                 "kind": f"hier_{artifact.stage2_kind}", "components": components}
    else:
        raise FormatError(f"cannot save artifact of type {type(artifact).__name__}")
    (path / BUNDLE_INDEX).write_text(json.dumps(index, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")


def load_artifact(path: str | Path):
    """Inverse of save_artifact; accepts a model file or a bundle directory."""
    path = Path(path)
    if path.is_file():
        return load_model(path)
    index_path = path / BUNDLE_INDEX
    if not index_path.is_file():
        raise FormatError(f"{path} is neither a model file nor a bundle directory")
    index = json.loads(index_path.read_text(encoding="utf-8"))
    if index.get("format") != "cabnlu-bundle":
        raise FormatError(f"unrecognized bundle format in {index_path}")
    if index.get("version") != FORMAT_VERSION:
        raise FormatError(f"unsupported bundle version {index.get('version')}")
    components = index["components"]
    kind = index["kind"]
    if kind.startswith("hybrid"):
        keyword_tagger = load_model(path / components["keyword_tagger"])
        slot_tagger = None
        if "slot_tagger" in components:
            slot_tagger = load_model(path / components["slot_tagger"])
        table = FreqTable.from_json((path / components["freq_table"]).read_text(encoding="utf-8"))
        return HybridPipeline(keyword_tagger, slot_tagger, table, index["mode"])
    if kind.startswith("hier_"):
        return HierarchicalPipeline(
            load_model(path / components["slot_tagger"]),
            load_model(path / components["keyword_tagger"]),
            load_model(path / components["stage2"]),
        )
    raise FormatError(f"unknown bundle kind {kind!r}")
