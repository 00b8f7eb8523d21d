"""Model definition: 4 conv blocks -> BiLSTM(16) -> temporal attention -> logit.

Each conv block is conv3x3 -> batch norm -> ReLU -> 2x2 max pool; pooling
stops along an axis once its extent has shrunk to 4, so every supported
input size ends in the same 32-dim feature vector after global average
pooling.  The feature sequence is batch-normalized per feature before
entering the bidirectional LSTM (16 hidden units per direction, tanh cell
activation).  Attention scores are e_t = h_t . w_a, softmax-normalized
with max subtraction, and the clip context is the attention-weighted
temporal average (1/T) sum_t a_t h_t feeding one sigmoid logit.

Batch-norm statistics are taken over each clip's own frames in train mode
(clips in a batch stay numerically independent, so batch evaluation order
cannot change results) and over running averages in eval mode.  Batches
are internally processed in fixed-size stacks of clips for speed; the
stack size is a constant so results do not depend on machine parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..synthgen import VideoClip
from . import layers

__all__ = [
    "ArchConfig",
    "ModelParams",
    "ForwardTrace",
    "init_model",
    "attention",
    "forward",
    "loss_and_gradients",
    "bce_with_logit",
    "label_to_float",
]

_CHANNELS = (8, 16, 32, 32)
_MIN_POOL_EXTENT = 4
_BN_EPS = 1e-5
# clips per internal stack; fixed so gradient accumulation order (and thus
# bit-level results) never depends on the host
_STACK = 8


@dataclass(frozen=True)
class ArchConfig:
    """Input geometry of the network; everything else is fixed."""

    input_h: int
    input_w: int
    channels: tuple = _CHANNELS
    lstm_hidden: int = 16

    def __post_init__(self):
        if self.input_h < _MIN_POOL_EXTENT or self.input_w < _MIN_POOL_EXTENT:
            raise ValueError(f"input {self.input_h}x{self.input_w} too small")

    @property
    def feature_dim(self) -> int:
        return self.channels[-1]

    @property
    def seq_dim(self) -> int:
        return 2 * self.lstm_hidden

    def pool_plan(self) -> list[tuple[bool, bool]]:
        """Per block: whether to pool along (h, w)."""
        plan = []
        h, w = self.input_h, self.input_w
        for _ in self.channels:
            ph = h > _MIN_POOL_EXTENT
            pw = w > _MIN_POOL_EXTENT
            if ph:
                h //= 2
            if pw:
                w //= 2
            plan.append((ph, pw))
        return plan

    def to_dict(self) -> dict:
        return {"input_h": self.input_h, "input_w": self.input_w,
                "channels": list(self.channels), "lstm_hidden": self.lstm_hidden}

    @classmethod
    def from_dict(cls, d: dict) -> "ArchConfig":
        return cls(input_h=int(d["input_h"]), input_w=int(d["input_w"]),
                   channels=tuple(d["channels"]), lstm_hidden=int(d["lstm_hidden"]))


@dataclass
class ModelParams:
    """Trainable tensors plus batch-norm running statistics.

    ``tensors`` keys (fixed ordering = sorted keys, used by checkpoints):
    att_w, bn{k}_g/_b, bnf_g/_b, conv{k}_w/_b, fc_w/_b, lstm_{fw,bw}_{W,U,b}.
    """

    arch: ArchConfig
    tensors: dict = field(default_factory=dict)
    bn_stats: dict = field(default_factory=dict)

    @property
    def dtype(self):
        return self.tensors["att_w"].dtype

    def copy(self) -> "ModelParams":
        return ModelParams(self.arch,
                           {k: v.copy() for k, v in self.tensors.items()},
                           {k: v.copy() for k, v in self.bn_stats.items()})


def _l2_included(name: str) -> bool:
    # biases and batch-norm shifts (all *_b tensors) are excluded; conv,
    # LSTM, attention, and fc weights plus batch-norm scales are penalized
    return not name.endswith("_b")


@dataclass
class ForwardTrace:
    """Observable quantities of one clip's forward pass."""

    frame_features: np.ndarray  # (T, D) CNN outputs after global avg pooling
    h: np.ndarray               # (T, 32) BiLSTM outputs (post-dropout in train)
    e: np.ndarray               # (T,) attention scores
    a: np.ndarray               # (T,) attention weights, sum to 1
    context: np.ndarray         # (32,) (1/T) sum_t a_t h_t
    logit: float
    prob: float


def init_model(arch: ArchConfig, seed: int, dtype=np.float64) -> ModelParams:
    """He-init convolutions, Glorot LSTM weights, forget-gate bias 1."""
    rng = np.random.default_rng(seed & ((1 << 64) - 1))
    dt = np.dtype(dtype)
    tensors: dict[str, np.ndarray] = {}
    bn_stats: dict[str, np.ndarray] = {}
    cin = 1
    for k, cout in enumerate(arch.channels, start=1):
        tensors[f"conv{k}_w"] = rng.normal(0.0, np.sqrt(2.0 / (cin * 9)),
                                           (cout, cin, 3, 3)).astype(dt)
        tensors[f"conv{k}_b"] = np.zeros(cout, dtype=dt)
        tensors[f"bn{k}_g"] = np.ones(cout, dtype=dt)
        tensors[f"bn{k}_b"] = np.zeros(cout, dtype=dt)
        bn_stats[f"bn{k}_mean"] = np.zeros(cout, dtype=dt)
        bn_stats[f"bn{k}_var"] = np.ones(cout, dtype=dt)
        cin = cout
    d = arch.feature_dim
    tensors["bnf_g"] = np.ones(d, dtype=dt)
    tensors["bnf_b"] = np.zeros(d, dtype=dt)
    bn_stats["bnf_mean"] = np.zeros(d, dtype=dt)
    bn_stats["bnf_var"] = np.ones(d, dtype=dt)
    hid = arch.lstm_hidden
    for direction in ("fw", "bw"):
        sw = np.sqrt(6.0 / (d + 4 * hid))
        su = np.sqrt(6.0 / (hid + 4 * hid))
        tensors[f"lstm_{direction}_W"] = rng.uniform(-sw, sw, (d, 4 * hid)).astype(dt)
        tensors[f"lstm_{direction}_U"] = rng.uniform(-su, su, (hid, 4 * hid)).astype(dt)
        b = np.zeros(4 * hid, dtype=dt)
        b[hid:2 * hid] = 1.0  # forget gate bias
        tensors[f"lstm_{direction}_b"] = b
    tensors["att_w"] = rng.normal(0.0, 1.0 / np.sqrt(arch.seq_dim),
                                  arch.seq_dim).astype(dt)
    tensors["fc_w"] = rng.normal(0.0, 1.0 / np.sqrt(arch.seq_dim),
                                 arch.seq_dim).astype(dt)
    tensors["fc_b"] = np.zeros(1, dtype=dt)
    return ModelParams(arch, tensors, bn_stats)


def attention(h: np.ndarray, w_a: np.ndarray):
    """Scores e_t = h_t . w_a and softmax weights a_t (max-subtracted)."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[1] != np.asarray(w_a).shape[0]:
        raise ValueError(f"h {h.shape} incompatible with w_a {np.shape(w_a)}")
    e = h @ np.asarray(w_a)
    return e, layers.softmax_stable(e)


def label_to_float(label) -> float:
    if isinstance(label, str):
        if label == "bline":
            return 1.0
        if label == "non_bline":
            return 0.0
        raise ValueError(f"unknown class label {label!r}")
    return float(label)


def bce_with_logit(logit: float, y: float) -> float:
    """Numerically stable binary cross entropy on the logit scale."""
    z = float(logit)
    return max(z, 0.0) - z * y + np.log1p(np.exp(-abs(z)))


def _clip_array(model: ModelParams, clip: VideoClip) -> np.ndarray:
    frames = clip.frames
    if frames.shape[1:] != (model.arch.input_h, model.arch.input_w):
        raise ValueError(
            f"clip frames {frames.shape[1:]} do not match the "
            f"{model.arch.input_h}x{model.arch.input_w} architecture")
    return frames.astype(model.dtype, copy=False)


def _stack_forward(model: ModelParams, frames: np.ndarray, train: bool,
                   dropout_rate: float, rng: np.random.Generator | None,
                   want_grads: bool = True):
    """Forward pass of a (B, T, H, W) stack of clips; returns a cache dict."""
    p = model.tensors
    arch = model.arch
    dt = model.dtype
    bsz, t_len = frames.shape[:2]
    x = frames.reshape(bsz * t_len, *frames.shape[2:], 1)  # NHWC
    plan = arch.pool_plan()
    blocks = []
    bn_batch = {}
    for k in range(1, len(arch.channels) + 1):
        y, conv_cache = layers.conv3x3_forward(x, p[f"conv{k}_w"], p[f"conv{k}_b"])
        y5 = y.reshape(bsz, t_len, *y.shape[1:])
        if train:
            y5, bn_cache = layers.batchnorm_forward(
                y5, p[f"bn{k}_g"], p[f"bn{k}_b"], (1, 2, 3), 4, _BN_EPS)
            bn_batch[f"bn{k}_mean"] = bn_cache[5].reshape(bsz, -1).mean(axis=0)
            bn_batch[f"bn{k}_var"] = bn_cache[6].reshape(bsz, -1).mean(axis=0)
        else:
            y5, bn_cache = layers.batchnorm_eval_forward(
                y5, p[f"bn{k}_g"], p[f"bn{k}_b"],
                model.bn_stats[f"bn{k}_mean"], model.bn_stats[f"bn{k}_var"], 4, _BN_EPS)
        y = y5.reshape(bsz * t_len, *y5.shape[2:])
        relu_mask = y > 0
        y = y * relu_mask
        y, pool_cache = layers.maxpool_forward(y, *plan[k - 1], want_cache=want_grads)
        blocks.append((conv_cache, bn_cache, relu_mask, pool_cache))
        x = y
    spatial = x.shape[1] * x.shape[2]
    feats = x.mean(axis=(1, 2)).reshape(bsz, t_len, -1)  # (B, T, D)
    if train:
        z, bnf_cache = layers.batchnorm_forward(feats, p["bnf_g"], p["bnf_b"],
                                                (1,), 2, _BN_EPS)
        bn_batch["bnf_mean"] = bnf_cache[5].reshape(bsz, -1).mean(axis=0)
        bn_batch["bnf_var"] = bnf_cache[6].reshape(bsz, -1).mean(axis=0)
    else:
        z, bnf_cache = layers.batchnorm_eval_forward(
            feats, p["bnf_g"], p["bnf_b"],
            model.bn_stats["bnf_mean"], model.bn_stats["bnf_var"], 2, _BN_EPS)
    mask1 = layers.dropout_mask(z.shape, dropout_rate, rng, dt) if train else None
    z_in = layers.apply_mask(z, mask1)
    hs_f, lstm_f_cache = layers.lstm_forward(z_in, p["lstm_fw_W"], p["lstm_fw_U"], p["lstm_fw_b"])
    hs_b_rev, lstm_b_cache = layers.lstm_forward(
        z_in[:, ::-1], p["lstm_bw_W"], p["lstm_bw_U"], p["lstm_bw_b"])
    h_raw = np.concatenate([hs_f, hs_b_rev[:, ::-1]], axis=2)  # (B, T, 32)
    mask2 = layers.dropout_mask(h_raw.shape, dropout_rate, rng, dt) if train else None
    h = layers.apply_mask(h_raw, mask2)
    e = h @ p["att_w"]  # (B, T)
    a = layers.softmax_stable(e)
    context = (a[:, :, None] * h).sum(axis=1) / t_len  # (B, 32)
    logits = context @ p["fc_w"] + p["fc_b"][0]  # (B,)
    probs = layers.sigmoid(logits)
    return {
        "bsz": bsz,
        "t_len": t_len,
        "blocks": blocks,
        "pool_shape": x.shape,
        "spatial": spatial,
        "feats": feats,
        "bnf": bnf_cache,
        "mask1": mask1,
        "mask2": mask2,
        "lstm_f": lstm_f_cache,
        "lstm_b": lstm_b_cache,
        "h": h,
        "e": e,
        "a": a,
        "context": context,
        "logits": logits,
        "probs": probs,
        "train": train,
        "bn_batch": bn_batch,
    }


def forward(model: ModelParams, clip: VideoClip, mode: str = "eval",
            rng: np.random.Generator | None = None,
            dropout_rate: float = 0.0) -> ForwardTrace:
    """Run one clip through the network.

    mode "train" uses the clip's own batch-norm statistics and (if
    dropout_rate > 0 and an rng is given) dropout; "eval" is deterministic
    and uses running statistics.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    train = mode == "train"
    if train and dropout_rate > 0.0 and rng is None:
        raise ValueError("train-mode dropout requires an rng stream")
    frames = _clip_array(model, clip)
    cache = _stack_forward(model, frames[None], train,
                           dropout_rate if train else 0.0, rng)
    return ForwardTrace(
        frame_features=cache["feats"][0],
        h=cache["h"][0],
        e=cache["e"][0],
        a=cache["a"][0],
        context=cache["context"][0],
        logit=float(cache["logits"][0]),
        prob=float(cache["probs"][0]),
    )


def _stack_backward(model: ModelParams, cache: dict, dlogits: np.ndarray,
                    grads: dict) -> None:
    """Accumulate parameter gradients of one clip stack into ``grads``."""
    p = model.tensors
    bsz, t_len = cache["bsz"], cache["t_len"]
    h, a, context = cache["h"], cache["a"], cache["context"]

    grads["fc_w"] += dlogits @ context
    grads["fc_b"] += np.array([dlogits.sum()], dtype=context.dtype)
    dcontext = dlogits[:, None] * p["fc_w"][None, :]  # (B, 32)

    da = (h * dcontext[:, None, :]).sum(axis=2) / t_len  # (B, T)
    dh = (a[:, :, None] * dcontext[:, None, :]) / t_len
    de = layers.softmax_backward(a, da)
    grads["att_w"] += (de[:, :, None] * h).sum(axis=(0, 1))
    dh = dh + de[:, :, None] * p["att_w"][None, None, :]

    dh = layers.apply_mask(dh, cache["mask2"])
    hid = model.arch.lstm_hidden
    dz_f, dw_f, du_f, db_f = layers.lstm_backward(
        dh[:, :, :hid], p["lstm_fw_W"], p["lstm_fw_U"], cache["lstm_f"])
    dz_b_rev, dw_b, du_b, db_b = layers.lstm_backward(
        np.ascontiguousarray(dh[:, ::-1, hid:]),
        p["lstm_bw_W"], p["lstm_bw_U"], cache["lstm_b"])
    grads["lstm_fw_W"] += dw_f
    grads["lstm_fw_U"] += du_f
    grads["lstm_fw_b"] += db_f
    grads["lstm_bw_W"] += dw_b
    grads["lstm_bw_U"] += du_b
    grads["lstm_bw_b"] += db_b
    dz = dz_f + dz_b_rev[:, ::-1]

    dz = layers.apply_mask(dz, cache["mask1"])
    if cache["train"]:
        dfeats, dg, db = layers.batchnorm_backward(dz, cache["bnf"])
    else:
        dfeats, dg, db = layers.batchnorm_eval_backward(dz, cache["bnf"])
    grads["bnf_g"] += dg
    grads["bnf_b"] += db

    shape = cache["pool_shape"]
    dx = np.broadcast_to(
        dfeats.reshape(bsz * t_len, -1)[:, :, None, None] / cache["spatial"], shape
    ).astype(dfeats.dtype)
    for k in range(len(model.arch.channels), 0, -1):
        conv_cache, bn_cache, relu_mask, pool_cache = cache["blocks"][k - 1]
        dx = layers.maxpool_backward(dx, pool_cache)
        dx = dx * relu_mask
        dy5 = dx.reshape(bsz, t_len, *dx.shape[1:])
        if cache["train"]:
            dy5, dg, db = layers.batchnorm_backward(dy5, bn_cache)
        else:
            dy5, dg, db = layers.batchnorm_eval_backward(dy5, bn_cache)
        grads[f"bn{k}_g"] += dg
        grads[f"bn{k}_b"] += db
        dx = dy5.reshape(bsz * t_len, *dy5.shape[2:])
        dx, dw, db = layers.conv3x3_backward(dx, p[f"conv{k}_w"], conv_cache)
        grads[f"conv{k}_w"] += dw
        grads[f"conv{k}_b"] += db


def zero_grads(model: ModelParams) -> dict:
    return {k: np.zeros_like(v) for k, v in model.tensors.items()}


def _stack_frames(model: ModelParams, clips: list) -> np.ndarray:
    t_len = clips[0].frames.shape[0]
    for c in clips:
        if c.frames.shape[0] != t_len:
            raise ValueError("clips in a batch must share the frame count")
    return np.stack([_clip_array(model, c) for c in clips])


def loss_and_gradients(model: ModelParams, batch: list, config,
                       rng: np.random.Generator | None = None):
    """Mean BCE + L2 loss and its exact gradients over a batch.

    ``batch`` is a list of (VideoClip, label) with label "bline",
    "non_bline", or a 0/1 number.  Dropout is active whenever
    config.dropout_rate > 0 and an rng is supplied; batch norm always uses
    per-clip statistics here (training objective).
    """
    loss, grads, _, _ = _loss_and_gradients_full(model, batch, config, rng)
    return loss, grads


def _batch_loss(model: ModelParams, batch: list, config,
                rng: np.random.Generator | None = None) -> float:
    """Loss only (no gradients); same value as loss_and_gradients."""
    dropout = config.dropout_rate if rng is not None else 0.0
    n = len(batch)
    total = 0.0
    for lo in range(0, n, _STACK):
        chunk = batch[lo:lo + _STACK]
        frames = _stack_frames(model, [c for c, _ in chunk])
        cache = _stack_forward(model, frames, True, dropout, rng, want_grads=False)
        ys = np.array([label_to_float(lbl) for _, lbl in chunk])
        total += sum(bce_with_logit(z, y) for z, y in zip(cache["logits"], ys))
    loss = total / n
    lam = config.l2_coefficient
    if lam > 0.0:
        for name, w in model.tensors.items():
            if _l2_included(name):
                loss += lam * float((w * w).sum())
    return float(loss)


def _loss_and_gradients_full(model: ModelParams, batch: list, config,
                             rng: np.random.Generator | None = None):
    if not batch:
        raise ValueError("batch must be non-empty")
    dropout = config.dropout_rate if rng is not None else 0.0
    n = len(batch)
    grads = zero_grads(model)
    total_bce = 0.0
    probs = []
    bn_accum: dict[str, np.ndarray] = {}
    for lo in range(0, n, _STACK):
        chunk = batch[lo:lo + _STACK]
        frames = _stack_frames(model, [c for c, _ in chunk])
        cache = _stack_forward(model, frames, True, dropout, rng)
        ys = np.array([label_to_float(lbl) for _, lbl in chunk])
        total_bce += sum(bce_with_logit(z, y) for z, y in zip(cache["logits"], ys))
        probs.extend(float(pr) for pr in cache["probs"])
        dlogits = (cache["probs"] - ys) / n
        _stack_backward(model, cache, dlogits, grads)
        scale = len(chunk) / n
        for k, v in cache["bn_batch"].items():
            bn_accum[k] = bn_accum.get(k, 0.0) + v * scale
    loss = total_bce / n
    lam = config.l2_coefficient
    if lam > 0.0:
        for name, w in model.tensors.items():
            if _l2_included(name):
                loss += lam * float((w * w).sum())
                grads[name] += 2.0 * lam * w
    if not np.isfinite(loss):
        raise ArithmeticError(f"non-finite training loss {loss}")
    return float(loss), grads, np.array(probs), bn_accum
