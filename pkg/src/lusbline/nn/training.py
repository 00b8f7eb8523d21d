"""Training loop: class-balanced sampling, flip augmentation, Adam.

The run is a pure function of (dataset, split, config): batch sampling,
dropout, and initialization each consume their own child seed of
config.seed, and batch-norm running statistics are updated with the
batch-mean of per-clip statistics after every step (momentum 0.9).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..metrics import ConfusionCounts, f1_score, precision_recall
from ..seeds import rng_from
from ..synthgen import VideoClip
from .model import (
    ArchConfig,
    ModelParams,
    _loss_and_gradients_full,
    forward,
    init_model,
    label_to_float,
)
from .optim import adam_step, init_adam

__all__ = ["TrainConfig", "train", "predict", "temporal_localize"]

_BN_MOMENTUM = 0.9


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings; defaults follow the training protocol, with
    the recorded protocol learning rate of 1e-6 (desk-scale runs override
    it, typically to 1e-3, since synthetic data converges in far fewer
    steps)."""

    learning_rate: float = 1e-6
    batch_size: int = 25
    dropout_rate: float = 0.2
    l2_coefficient: float = 1e-5
    epochs: int = 60
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0
    class_balancing: bool = True
    flip_augmentation: bool = True
    dtype: str = "float64"

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0 or self.l2_coefficient < 0:
            raise ValueError("invalid learning_rate or l2_coefficient")
        if self.dtype not in ("float64", "float32"):
            raise ValueError("dtype must be 'float64' or 'float32'")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "dropout_rate": self.dropout_rate,
            "l2_coefficient": self.l2_coefficient,
            "epochs": self.epochs,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "adam_epsilon": self.adam_epsilon,
            "seed": self.seed,
            "class_balancing": self.class_balancing,
            "flip_augmentation": self.flip_augmentation,
            "dtype": self.dtype,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


def _balanced_weights(labels01: np.ndarray) -> np.ndarray:
    """Draw probability inversely proportional to class frequency."""
    n = labels01.size
    n_pos = int(labels01.sum())
    n_neg = n - n_pos
    w = np.where(labels01 > 0.5, 1.0 / n_pos, 1.0 / n_neg)
    return w / w.sum()


def _update_running_stats(model: ModelParams, bn_batch: dict) -> None:
    for k, v in bn_batch.items():
        model.bn_stats[k] = _BN_MOMENTUM * model.bn_stats[k] + (1.0 - _BN_MOMENTUM) * v


def train(dataset: list, split, config: TrainConfig):
    """Train on dataset[i] for i in split; returns (ModelParams, epoch log).

    ``dataset`` is a list of (VideoClip, ClipLabels) already preprocessed to
    the target representation and size.  The training split must contain
    both classes.
    """
    samples = [(dataset[i][0], dataset[i][1].video_class) for i in split]
    labels01 = np.array([label_to_float(lbl) for _, lbl in samples])
    if labels01.min() == labels01.max():
        raise ValueError("training split must contain both classes")

    if config.flip_augmentation:
        from ..harness.preprocess import flip_augment  # lazy: avoids an import cycle
        flipped = []
        for i in split:
            clip, labels = dataset[i]
            fclip, flabels = flip_augment(clip, labels)
            flipped.append((fclip, flabels.video_class))
        samples = samples + flipped
        labels01 = np.concatenate([labels01, labels01])

    n = len(samples)
    dtype = np.float64 if config.dtype == "float64" else np.float32
    arch = ArchConfig(input_h=samples[0][0].frames.shape[1],
                      input_w=samples[0][0].frames.shape[2])
    model = init_model(arch, seed=rng_from(config.seed, 0).integers(1 << 63), dtype=dtype)
    state = init_adam(model)
    rng_batch = rng_from(config.seed, 1)
    rng_drop = rng_from(config.seed, 2)
    weights = _balanced_weights(labels01) if config.class_balancing else None

    n_batches = math.ceil(n / config.batch_size)
    log = []
    for epoch in range(config.epochs):
        order = rng_batch.permutation(n)
        epoch_loss = 0.0
        counts = ConfusionCounts()
        for b in range(n_batches):
            if config.class_balancing:
                idx = rng_batch.choice(n, size=config.batch_size, replace=True, p=weights)
            else:
                idx = order[b * config.batch_size:(b + 1) * config.batch_size]
                if idx.size == 0:
                    continue
            batch = [samples[i] for i in idx]
            loss, grads, probs, bn_batch = _loss_and_gradients_full(
                model, batch, config, rng_drop)
            model, state = adam_step(model, grads, state, config)
            _update_running_stats(model, bn_batch)
            epoch_loss += loss
            for (_, lbl), prob in zip(batch, probs):
                counts.add(prob >= 0.5, label_to_float(lbl) > 0.5)
        pr = precision_recall(counts)
        log.append({
            "epoch": epoch,
            "loss": epoch_loss / n_batches,
            "f1": f1_score(pr.precision, pr.recall),
            "accuracy": (counts.tp + counts.tn) / max(counts.total, 1),
        })
    return model, log


def predict(model: ModelParams, clip: VideoClip):
    """Eval-mode inference: (prob, predicted class, attention weights).

    Ties at prob == 0.5 classify as "bline" (the positive class).
    """
    trace = forward(model, clip, "eval")
    cls = "bline" if trace.prob >= 0.5 else "non_bline"
    return trace.prob, cls, trace.a


def temporal_localize(a: np.ndarray, threshold: float | None = None) -> list[int]:
    """Frames whose attention weight exceeds the threshold (default 1/T).

    The default above-uniform rule returns every frame the model weights
    more than a uniform distribution would; the result may be empty.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("attention weights must be a non-empty vector")
    if abs(float(a.sum()) - 1.0) > 1e-6:
        raise ValueError("attention weights must sum to 1")
    cut = (1.0 / a.size) if threshold is None else float(threshold)
    return [int(i) for i in np.flatnonzero(a > cut)]
