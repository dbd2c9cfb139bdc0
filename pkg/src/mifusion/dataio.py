"""Dataset ingestion, run configuration, checkpointing and score dumps.

Datasets are JSON-lines files, one clip per line with keys id, label, text,
visual and acoustic; per-modality widths must agree across the file. The
checkpoint is a single versioned JSON document; floats survive the round
trip bitwise because repr-formatted doubles parse back exactly.
"""

import dataclasses
import json
import math
import os

import numpy as np

from .encoders import RawSample
from .errors import ConfigError, CorruptFile, ParseError, VersionMismatch, WidthMismatch, ZeroVector
from .model import ModelConfig, MultimodalModel
from .numeric import make_rng
from .trainer import TrainConfig

CHECKPOINT_VERSION = 1


def _as_float_matrix(value, what, line):
    try:
        arr = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{what} is not a numeric matrix: {exc}", line=line) from exc
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ParseError(f"{what} must be a nonempty list of equal-length rows", line=line)
    if not np.all(np.isfinite(arr)):
        raise ParseError(f"{what} contains non-finite values", line=line)
    return arr


def _parse_text(value, line):
    """Token-id list or vector rows; returns (array, mode)."""
    if not isinstance(value, list) or not value:
        raise ParseError("text must be a nonempty list", line=line)
    if isinstance(value[0], list):
        return _as_float_matrix(value, "text", line), "vectors"
    try:
        ids = np.asarray(value, dtype=np.int64)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"text token ids are not integers: {exc}", line=line) from exc
    if ids.ndim != 1:
        raise ParseError("text token ids must be a flat list", line=line)
    return ids, "tokens"


def load_jsonl(path) -> list:
    """Parse a dataset file into RawSamples, in file order.

    Widths (and the text mode) are validated against the first record;
    an empty file yields an empty list.
    """
    samples = []
    text_mode = None
    widths = {}
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc}", line=lineno) from exc
            if not isinstance(obj, dict):
                raise ParseError("record is not an object", line=lineno)
            for key in ("id", "label", "text", "visual", "acoustic"):
                if key not in obj:
                    raise ParseError(f"missing {key!r}", line=lineno)
            label = obj["label"]
            if not isinstance(label, (int, float)) or not math.isfinite(label):
                raise ParseError("label must be a finite number", line=lineno)
            text, mode = _parse_text(obj["text"], lineno)
            visual = _as_float_matrix(obj["visual"], "visual", lineno)
            acoustic = _as_float_matrix(obj["acoustic"], "acoustic", lineno)
            if text_mode is None:
                text_mode = mode
                if mode == "vectors":
                    widths["text"] = text.shape[1]
                widths["visual"] = visual.shape[1]
                widths["acoustic"] = acoustic.shape[1]
            else:
                if mode != text_mode:
                    raise ParseError(
                        f"text switches from {text_mode} to {mode}", line=lineno
                    )
                if mode == "vectors" and text.shape[1] != widths["text"]:
                    raise WidthMismatch(
                        f"text width {text.shape[1]} != {widths['text']}", line=lineno
                    )
                if visual.shape[1] != widths["visual"]:
                    raise WidthMismatch(
                        f"visual width {visual.shape[1]} != {widths['visual']}", line=lineno
                    )
                if acoustic.shape[1] != widths["acoustic"]:
                    raise WidthMismatch(
                        f"acoustic width {acoustic.shape[1]} != {widths['acoustic']}", line=lineno
                    )
            samples.append(
                RawSample(
                    id=str(obj["id"]), label=float(label),
                    text=text, visual=visual, acoustic=acoustic,
                )
            )
    return samples


def save_jsonl(samples, path):
    """Inverse of load_jsonl; floats are repr-formatted so bytes round-trip."""
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            text = s.text.tolist()
            fh.write(
                json.dumps(
                    {
                        "id": s.id,
                        "label": float(s.label),
                        "text": text,
                        "visual": s.visual.tolist(),
                        "acoustic": s.acoustic.tolist(),
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def dataset_text_mode(samples) -> str:
    if not samples:
        raise ConfigError("cannot infer text mode from an empty dataset")
    return "tokens" if samples[0].text.ndim == 1 else "vectors"


# --- checkpoints ---


def checkpoint_document(model: MultimodalModel, train_config: TrainConfig) -> dict:
    return {
        "version": CHECKPOINT_VERSION,
        "model_config": dataclasses.asdict(model.cfg),
        "train_config": dataclasses.asdict(train_config),
        "params": {name: arr.tolist() for name, arr in sorted(model.param_arrays().items())},
    }


def save_checkpoint(model: MultimodalModel, train_config: TrainConfig, path):
    doc = checkpoint_document(model, train_config)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path):
    """Rebuild (model, TrainConfig) from a checkpoint; parameters restore
    bitwise. Raises VersionMismatch or CorruptFile on bad documents."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptFile(f"unreadable checkpoint: {exc}") from exc
    if not isinstance(doc, dict) or "version" not in doc:
        raise CorruptFile("checkpoint lacks a version field")
    if doc["version"] != CHECKPOINT_VERSION:
        raise VersionMismatch(
            f"checkpoint version {doc['version']!r}, expected {CHECKPOINT_VERSION}"
        )
    try:
        model_cfg = ModelConfig(**doc["model_config"])
        train_cfg = TrainConfig(**doc["train_config"])
        params = {name: np.asarray(arr, dtype=np.float64) for name, arr in doc["params"].items()}
    except (KeyError, TypeError) as exc:
        raise CorruptFile(f"malformed checkpoint: {exc}") from exc
    model = MultimodalModel(model_cfg, make_rng(0))
    model.load_param_arrays(params)
    return model, train_cfg


# --- per-sample score dump ---


def dump_scores(model: MultimodalModel, samples, path):
    """CSV of per-sample fusion-modality alignment scores and predictions.

    Cosines lie in [-1, 1]; the exponentiated scores in [e^-1, e]. Both are
    emitted because reported case-study values correspond to the cosine.
    """
    emb, z, preds = model.forward(samples)
    cos = {}
    for m in ("t", "v", "a"):
        pred = model.cpc_preds.get(m)
        if pred is None:
            cos[m] = np.full(len(samples), np.nan)
            continue
        g = pred.predict(z).data
        h = emb[m].data
        g_norms = np.linalg.norm(g, axis=1, keepdims=True)
        h_norms = np.linalg.norm(h, axis=1, keepdims=True)
        if np.any(g_norms < 1e-12) or np.any(h_norms < 1e-12):
            raise ZeroVector(f"cannot score near-zero vectors for modality {m!r}")
        cos[m] = np.sum((g / g_norms) * (h / h_norms), axis=1)
    lines = ["id,cos_zt,cos_zv,cos_za,score_zt,score_zv,score_za,pred,truth"]
    for i, s in enumerate(samples):
        cells = [s.id]
        cells += [repr(float(cos[m][i])) for m in ("t", "v", "a")]
        cells += [repr(float(np.exp(cos[m][i]))) for m in ("t", "v", "a")]
        cells += [repr(float(preds.data[i])), repr(float(s.label))]
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# --- run configuration ---

_MODEL_KEYS = (
    "d_text", "d_visual", "d_acoustic", "d_token_embed", "vocab_size",
    "fusion_hidden", "fusion_dim", "head_hidden", "predictor_hidden",
    "cpc_hidden", "ba_pairs", "cpc_modalities",
)
_TRAIN_KEYS = tuple(f.name for f in dataclasses.fields(TrainConfig))
_PATH_KEYS = ("train_path", "val_path", "test_path", "out_dir")


def load_run_config(path) -> dict:
    """Validated flat run configuration; unknown keys are rejected."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    allowed = set(_MODEL_KEYS) | set(_TRAIN_KEYS) | set(_PATH_KEYS)
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    for key in ("train_path", "val_path", "out_dir"):
        if key not in doc:
            raise ConfigError(f"config is missing {key!r}")
    return doc


def build_train_config(doc: dict) -> TrainConfig:
    kwargs = {k: doc[k] for k in _TRAIN_KEYS if k in doc}
    return TrainConfig(**kwargs)


def build_model_config(doc: dict, train_samples) -> ModelConfig:
    """Model configuration with input widths and text mode taken from data."""
    if not train_samples:
        raise ConfigError("training data is empty")
    kwargs = {k: doc[k] for k in _MODEL_KEYS if k in doc and doc[k] is not None}
    mode = dataset_text_mode(train_samples)
    kwargs["text_mode"] = mode
    first = train_samples[0]
    if mode == "tokens":
        if "vocab_size" not in kwargs:
            kwargs["vocab_size"] = int(max(int(np.max(s.text)) for s in train_samples)) + 1
    else:
        kwargs.pop("vocab_size", None)
        kwargs["d_text_in"] = int(first.text.shape[1])
    kwargs["d_visual_in"] = int(first.visual.shape[1])
    kwargs["d_acoustic_in"] = int(first.acoustic.shape[1])
    return ModelConfig(**kwargs)


def write_text(path, content: str):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(content)
