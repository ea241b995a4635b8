"""Binary persuasion-technique classifier.

The heavy lifting lives in the compiled ``_core`` extension; this package
re-exports it.
"""

from ._core import (
    Classifier,
    Corpus,
    RuntimeFailure,
    ValidationError,
    class_weights,
    early_stop_check,
    label_distribution,
    load_corpus,
    lr_at_epoch,
    micro_f1,
    per_class_f1,
    run_cli,
    stratified_split,
    train,
    weighted_cross_entropy,
    write_corpus,
)

__all__ = [
    "Classifier",
    "Corpus",
    "RuntimeFailure",
    "ValidationError",
    "class_weights",
    "early_stop_check",
    "label_distribution",
    "load_corpus",
    "lr_at_epoch",
    "micro_f1",
    "per_class_f1",
    "run_cli",
    "stratified_split",
    "train",
    "weighted_cross_entropy",
    "write_corpus",
]
__version__ = "0.1.0"
