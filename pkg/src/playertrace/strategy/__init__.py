"""Three-class problem-solving-strategy classifiers over window feature vectors."""

from .labels import ML_VALUES, N_CLASSES, StrategyLabel, ml_value
from .model import (
    ALGORITHMS,
    DEFAULT_ALGORITHM,
    ClassifierModel,
    LabeledWindow,
    ModelError,
    load_model,
    model_from_json,
    model_to_json,
    predict,
    save_model,
    train,
    train_arrays,
)

__all__ = [
    "ALGORITHMS",
    "DEFAULT_ALGORITHM",
    "ML_VALUES",
    "N_CLASSES",
    "ClassifierModel",
    "LabeledWindow",
    "ModelError",
    "StrategyLabel",
    "load_model",
    "ml_value",
    "model_from_json",
    "model_to_json",
    "predict",
    "save_model",
    "train",
    "train_arrays",
]
