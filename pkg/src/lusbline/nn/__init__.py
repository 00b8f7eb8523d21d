"""Classification model: per-frame CNN, bidirectional LSTM, temporal attention.

Everything is plain numpy with hand-written backward passes; gradients are
exact analytic derivatives of the training loss and are validated against
central finite differences in the test suite.
"""

from .model import (
    ArchConfig,
    ForwardTrace,
    ModelParams,
    attention,
    forward,
    init_model,
    loss_and_gradients,
)
from .optim import AdamState, adam_step, init_adam
from .training import TrainConfig, predict, temporal_localize, train
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "ArchConfig",
    "ModelParams",
    "ForwardTrace",
    "AdamState",
    "TrainConfig",
    "init_model",
    "forward",
    "attention",
    "loss_and_gradients",
    "adam_step",
    "init_adam",
    "train",
    "predict",
    "temporal_localize",
    "save_checkpoint",
    "load_checkpoint",
]
