"""Profile-counter guided autotuning search (native core in _countertune)."""

from ._countertune import (
    Dataset,
    Error,
    ModelError,
    ModelSet,
    analyze,
    compare,
    counter_names,
    generate_synthetic,
    load_dataset,
    load_model,
    parse_model,
    react,
    simulate,
    train_models,
)

__all__ = [
    "Dataset",
    "Error",
    "ModelError",
    "ModelSet",
    "analyze",
    "compare",
    "counter_names",
    "generate_synthetic",
    "load_dataset",
    "load_model",
    "parse_model",
    "react",
    "simulate",
    "train_models",
]
