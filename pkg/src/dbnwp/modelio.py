"""Versioned JSON model files.

A file is one JSON object::

    {"format": "dbnwp-model", "version": 1, "sha256": "...", "model": {...}}

``sha256`` covers the canonical serialization of ``model`` (sorted keys, no
whitespace), so a truncated or edited file is caught on load. Floats are
written with ``repr`` precision, which round-trips float64 exactly.
"""

import hashlib
import json
from pathlib import Path

from .dataset import Normalization
from .dbn import DbnArchitecture, DbnModel
from .rbm import RbmParams

FORMAT_NAME = "dbnwp-model"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Unreadable, corrupted or foreign model file."""


class ModelVersionError(ModelFormatError):
    def __init__(self, expected: int, found):
        super().__init__(f"unsupported model file version: expected {expected}, found {found}")
        self.expected = expected
        self.found = found


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def model_to_dict(model: DbnModel) -> dict:
    arch = model.architecture
    return {
        "architecture": {
            "input_dim": arch.input_dim,
            "hidden_sizes": list(arch.hidden_sizes),
            "output_dim": arch.output_dim,
        },
        "layers": [{"W": r.W.tolist(), "b": r.b.tolist(), "c": r.c.tolist()} for r in model.rbm_stack],
        "head": {"weights": model.head_weights.tolist(), "bias": model.head_bias},
        "normalization": None if model.normalization is None else model.normalization.to_dict(),
        "provenance": model.provenance,
    }


def model_from_dict(d: dict) -> DbnModel:
    try:
        a = d["architecture"]
        arch = DbnArchitecture(a["input_dim"], tuple(a["hidden_sizes"]), a["output_dim"])
        stack = [RbmParams(layer["W"], layer["b"], layer["c"]) for layer in d["layers"]]
        norm = None if d["normalization"] is None else Normalization.from_dict(d["normalization"])
        return DbnModel(arch, stack, d["head"]["weights"], d["head"]["bias"], norm, d["provenance"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model payload: {exc}") from None


def dumps(model: DbnModel) -> str:
    payload = model_to_dict(model)
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "sha256": hashlib.sha256(_canonical(payload).encode()).hexdigest(),
        "model": payload,
    }
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n"


def loads(text: str) -> DbnModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"corrupted model file: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ModelFormatError("not a dbnwp model file")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelVersionError(FORMAT_VERSION, doc.get("version"))
    payload = doc.get("model")
    digest = hashlib.sha256(_canonical(payload).encode()).hexdigest()
    if digest != doc.get("sha256"):
        raise ModelFormatError("corrupted model file: checksum mismatch")
    return model_from_dict(payload)


def save_model(model: DbnModel, path):
    Path(path).write_text(dumps(model))


def load_model(path) -> DbnModel:
    return loads(Path(path).read_text())
