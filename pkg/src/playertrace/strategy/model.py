"""Classifier training, prediction and the on-disk model format.

Model files are JSON::

    {"format": "playertrace-classifier", "format_version": 1,
     "algorithm": "c45_tree", "schema_version": "v1", "n_features": 65,
     "classes": ["TRIAL_AND_ERROR", "SEQUENTIAL", "PARALLEL"],
     "config": {...}, "warnings": [...], "params": {...}}

Arrays inside ``params`` are nested lists; floats are written with ``repr``
precision so a reloaded model predicts bit-identically.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .._io import write_atomic
from ..features import SCHEMAS, FeatureVector, feature_schema
from . import logistic, naive_bayes, tree
from .labels import N_CLASSES, StrategyLabel

log = logging.getLogger(__name__)

ALGORITHMS = ("naive_bayes", "c45_tree", "multinomial_logistic", "bagged_trees")
DEFAULT_ALGORITHM = "c45_tree"
MODEL_FORMAT = "playertrace-classifier"
MODEL_FORMAT_VERSION = 1


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledWindow:
    features: FeatureVector
    label: StrategyLabel
    student_id: str
    level_id: str


@dataclass
class ClassifierModel:
    algorithm: str
    schema_version: str
    n_features: int
    params: dict[str, Any]
    config: dict[str, Any] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    classes: tuple[str, ...] = tuple(c.name for c in StrategyLabel)

    @property
    def constant(self) -> int | None:
        return self.params.get("constant")

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ModelError(f"model expects {self.n_features} features, got {X.shape[1]}")
        if self.constant is not None:
            p = np.zeros((len(X), N_CLASSES))
            p[:, self.constant] = 1.0
            return p
        if self.algorithm == "naive_bayes":
            p = naive_bayes.predict_proba(self.params, X)
        elif self.algorithm == "c45_tree":
            p = tree.tree_proba(self.params, X)
        elif self.algorithm == "multinomial_logistic":
            p = logistic.predict_proba(self.params, X)
        else:
            p = tree.bagged_proba(self.params, X)
        return p / p.sum(axis=1, keepdims=True)

    def predict_labels(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)


def train_arrays(X: np.ndarray, y: np.ndarray, algorithm: str = DEFAULT_ALGORITHM,
                 config: Mapping[str, Any] | None = None, seed: int = 0,
                 schema_version: str = "v1") -> ClassifierModel:
    if algorithm not in ALGORITHMS:
        raise ModelError(f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise ModelError("cannot train on an empty dataset")
    if X.ndim != 2 or len(X) != len(y):
        raise ModelError("feature matrix and label vector disagree in length")
    cfg = dict(config or {})
    classes = np.unique(y)
    if len(classes) == 1:
        msg = (f"single-class training data ({StrategyLabel(int(classes[0])).name}); "
               "returning a constant classifier")
        log.warning(msg)
        return ClassifierModel(algorithm, schema_version, X.shape[1],
                               {"constant": int(classes[0])}, cfg, [msg])
    if algorithm == "naive_bayes":
        params = naive_bayes.fit(X, y, N_CLASSES, cfg.get("var_smoothing", naive_bayes.VAR_SMOOTHING))
    elif algorithm == "c45_tree":
        params = tree.fit_tree(X, y, N_CLASSES, cfg.get("min_leaf", tree.MIN_LEAF),
                               cfg.get("max_depth"))
    elif algorithm == "multinomial_logistic":
        params = logistic.fit(X, y, N_CLASSES, cfg.get("l2", logistic.L2),
                              cfg.get("step", logistic.STEP), cfg.get("epochs", logistic.EPOCHS))
    else:
        params = tree.fit_bagged(X, y, N_CLASSES, cfg.get("n_trees", tree.N_TREES),
                                 cfg.get("bootstrap", True), seed,
                                 cfg.get("min_leaf", tree.MIN_LEAF))
    cfg.setdefault("seed", seed)
    return ClassifierModel(algorithm, schema_version, X.shape[1], params, cfg)


def train(data: Sequence[LabeledWindow], algorithm: str = DEFAULT_ALGORITHM,
          config: Mapping[str, Any] | None = None, seed: int = 0) -> ClassifierModel:
    if not data:
        raise ModelError("cannot train on an empty dataset")
    versions = {d.features.schema_version for d in data}
    if len(versions) != 1:
        raise ModelError(f"mixed feature schema versions in training data: {sorted(versions)}")
    version = versions.pop()
    n = len(feature_schema(version))
    if any(len(d.features.values) != n for d in data):
        raise ModelError(f"feature vectors do not match schema {version!r} length {n}")
    X = np.array([d.features.values for d in data], dtype=float)
    y = np.array([int(d.label) for d in data], dtype=np.int64)
    return train_arrays(X, y, algorithm, config, seed, version)


def predict(model: ClassifierModel, fv: FeatureVector) -> tuple[StrategyLabel, np.ndarray]:
    """Label and class distribution for one window.

    Ties resolve toward the lower label (trial-and-error first).
    """
    if fv.schema_version != model.schema_version or len(fv.values) != model.n_features:
        raise ModelError(f"feature schema {fv.schema_version!r} does not match "
                         f"model schema {model.schema_version!r}")
    probs = model.predict_proba(np.asarray(fv.values, dtype=float)[None, :])[0]
    return StrategyLabel(int(np.argmax(probs))), probs


# -- persistence --------------------------------------------------------------

def _to_jsonable(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.tolist(), "dtype": str(obj.dtype)}
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _from_jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            return np.array(obj["__ndarray__"], dtype=obj["dtype"])
        return {k: _from_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_from_jsonable(v) for v in obj]
    return obj


def model_to_json(model: ClassifierModel) -> str:
    doc = {
        "format": MODEL_FORMAT,
        "format_version": MODEL_FORMAT_VERSION,
        "algorithm": model.algorithm,
        "schema_version": model.schema_version,
        "n_features": model.n_features,
        "classes": list(model.classes),
        "config": _to_jsonable(model.config),
        "warnings": list(model.warnings),
        "params": _to_jsonable(model.params),
    }
    return json.dumps(doc, sort_keys=True)


def model_from_json(text: str) -> ClassifierModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"corrupt model file: {exc.msg}") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelError("corrupt model file: not a playertrace classifier")
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelError(f"model format version {doc.get('format_version')!r} is not supported "
                         f"(expected {MODEL_FORMAT_VERSION})")
    version = doc.get("schema_version")
    if version not in SCHEMAS:
        raise ModelError(f"model was trained on feature schema {version!r}, which this "
                         f"build does not provide (known: {', '.join(SCHEMAS)})")
    try:
        model = ClassifierModel(doc["algorithm"], version, int(doc["n_features"]),
                                _from_jsonable(doc["params"]), _from_jsonable(doc["config"]),
                                list(doc["warnings"]), tuple(doc["classes"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"corrupt model file: {exc}") from None
    if model.algorithm not in ALGORITHMS:
        raise ModelError(f"corrupt model file: unknown algorithm {model.algorithm!r}")
    if model.n_features != len(SCHEMAS[version]):
        raise ModelError("corrupt model file: feature count disagrees with its schema")
    return model


def save_model(model: ClassifierModel, path: str | os.PathLike) -> None:
    write_atomic(path, model_to_json(model))


def load_model(path: str | os.PathLike) -> ClassifierModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_json(fh.read())
