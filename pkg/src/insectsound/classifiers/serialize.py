"""Versioned JSON serialization for trained models.

Documents are self-describing: a format tag, schema version, variant name,
class registry, feature width, and a variant-specific payload of flattened
arrays. Floats survive the round trip bit-exactly (JSON uses shortest
round-trip representations).
"""

from __future__ import annotations

import json
from pathlib import Path

from .base import TrainedModel
from .cart import DecisionTreeModel
from .forest import RandomForestModel
from .gbt import GradientBoostedModel
from .knn import KnnModel
from .svm import SvmRbfModel

MODEL_FORMAT = "insectsound-model"
MODEL_SCHEMA_VERSION = 1

_VARIANTS = {
    m.variant: m
    for m in (DecisionTreeModel, RandomForestModel, KnnModel, SvmRbfModel, GradientBoostedModel)
}


def model_to_document(model: TrainedModel) -> dict:
    if model.variant not in _VARIANTS:
        raise ValueError(f"cannot serialize unknown model variant {model.variant!r}")
    return {
        "format": MODEL_FORMAT,
        "schema_version": MODEL_SCHEMA_VERSION,
        "variant": model.variant,
        "classes": list(model.classes),
        "feature_width": model.feature_width,
        "payload": model._payload(),
    }


def model_from_document(doc: dict) -> TrainedModel:
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"not a model document (format={doc.get('format')!r})")
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise ValueError(f"unsupported model schema version {doc.get('schema_version')!r}")
    variant = doc.get("variant")
    if variant not in _VARIANTS:
        raise ValueError(f"unknown model variant {variant!r}")
    return _VARIANTS[variant]._from_payload(
        doc["payload"], doc["classes"], doc["feature_width"]
    )


def save_model(model: TrainedModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_document(model)))


def load_model(path) -> TrainedModel:
    return model_from_document(json.loads(Path(path).read_text()))
