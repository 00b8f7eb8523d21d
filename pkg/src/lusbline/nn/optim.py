"""Adam with bias correction, functional style."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams

__all__ = ["AdamState", "init_adam", "adam_step"]


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)  # first moments, per tensor
    v: dict = field(default_factory=dict)  # second moments
    step: int = 0


def init_adam(model: ModelParams) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(t) for k, t in model.tensors.items()},
        v={k: np.zeros_like(t) for k, t in model.tensors.items()},
        step=0,
    )


def adam_step(model: ModelParams, grads: dict, state: AdamState,
              config) -> tuple[ModelParams, AdamState]:
    """One update; returns fresh params and state, inputs untouched."""
    if set(grads) != set(model.tensors):
        raise ValueError("gradient keys do not match parameter tensors")
    b1, b2 = config.adam_beta1, config.adam_beta2
    eps, lr = config.adam_epsilon, config.learning_rate
    t = state.step + 1
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_tensors = {}
    new_m = {}
    new_v = {}
    for k, p in model.tensors.items():
        g = grads[k]
        m = b1 * state.m[k] + (1.0 - b1) * g
        v = b2 * state.v[k] + (1.0 - b2) * g * g
        new_tensors[k] = p - lr * (m / c1) / (np.sqrt(v / c2) + eps)
        new_m[k] = m
        new_v[k] = v
    out = ModelParams(model.arch, new_tensors,
                      {k: s.copy() for k, s in model.bn_stats.items()})
    return out, AdamState(new_m, new_v, t)
