"""Dataset I/O, cross-validation, the resolution/representation sweep, CLI."""

from .crossval import kfold_split
from .dataio import FormatError, load_dataset, save_dataset
from .preprocess import flip_augment, preprocess

__all__ = [
    "kfold_split",
    "FormatError",
    "load_dataset",
    "save_dataset",
    "flip_augment",
    "preprocess",
]
