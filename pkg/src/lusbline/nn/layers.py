"""Numpy layer primitives with explicit forward caches and backward passes.

Convolutional tensors are (N, C, H, W) where N flattens (clip, frame);
sequence tensors are (B, T, D) with B the clip axis.  Batch-norm
statistics are always per clip, so clips stay numerically independent of
whatever batch they ride in.
"""

from __future__ import annotations

import numpy as np


def sigmoid(x: np.ndarray) -> np.ndarray:
    # clamp keeps exp() in range; exact to double precision for |x| < 60
    return 1.0 / (1.0 + np.exp(-x.clip(-60.0, 60.0)))


# ---------------------------------------------------------------------------
# 3x3 same-padding convolution via im2col + GEMM.  Activations are NHWC so
# the patch buffer (N, H, W, 3, 3, C) reshapes to the GEMM operand with no
# copy and all bulk moves run over contiguous channel runs.

def conv3x3_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    n, h, wd, cin = x.shape
    cout = w.shape[0]
    xp = np.zeros((n, h + 2, wd + 2, cin), dtype=x.dtype)
    xp[:, 1:h + 1, 1:wd + 1, :] = x
    patches = np.empty((n, h, wd, 3, 3, cin), dtype=x.dtype)
    for di in range(3):
        for dj in range(3):
            patches[:, :, :, di, dj, :] = xp[:, di:di + h, dj:dj + wd, :]
    flat = patches.reshape(n * h * wd, 9 * cin)
    wmat = np.ascontiguousarray(w.transpose(2, 3, 1, 0)).reshape(9 * cin, cout)
    y = flat @ wmat
    y += b
    return y.reshape(n, h, wd, cout), (flat, x.shape)


def conv3x3_backward(dy: np.ndarray, w: np.ndarray, cache):
    flat, xshape = cache
    n, h, wd, cin = xshape
    cout = w.shape[0]
    dyf = dy.reshape(n * h * wd, cout)
    dwmat = flat.T @ dyf  # (9*cin, cout)
    dw = np.ascontiguousarray(dwmat.reshape(3, 3, cin, cout).transpose(3, 2, 0, 1))
    db = dyf.sum(axis=0)
    wmat = np.ascontiguousarray(w.transpose(2, 3, 1, 0)).reshape(9 * cin, cout)
    dpatches = (dyf @ wmat.T).reshape(n, h, wd, 3, 3, cin)
    dxp = np.zeros((n, h + 2, wd + 2, cin), dtype=dy.dtype)
    for di in range(3):
        for dj in range(3):
            dxp[:, di:di + h, dj:dj + wd, :] += dpatches[:, :, :, di, dj, :]
    return np.ascontiguousarray(dxp[:, 1:h + 1, 1:wd + 1, :]), dw, db


# ---------------------------------------------------------------------------
# 2x max pooling along the requested axes of NHWC tensors, implemented as a
# pairwise max per axis; ties route the gradient to the earlier element so
# the backward pass is deterministic

def _pairpool_axis(x: np.ndarray, axis: int):
    extent = x.shape[axis]
    half = extent // 2
    sl = [slice(None)] * x.ndim
    sl[axis] = slice(0, 2 * half, 2)
    a = x[tuple(sl)]
    sl[axis] = slice(1, 2 * half, 2)
    b = x[tuple(sl)]
    choose = a >= b
    return np.where(choose, a, b), choose


def _pairpool_axis_backward(dy: np.ndarray, choose: np.ndarray, axis: int, shape):
    dx = np.zeros(shape, dtype=dy.dtype)
    half = shape[axis] // 2
    sl = [slice(None)] * dy.ndim
    sl[axis] = slice(0, 2 * half, 2)
    dx[tuple(sl)] = np.where(choose, dy, 0.0)
    sl[axis] = slice(1, 2 * half, 2)
    dx[tuple(sl)] = np.where(choose, 0.0, dy)
    return dx


def maxpool_forward(x: np.ndarray, pool_h: bool, pool_w: bool, want_cache: bool = True):
    if not pool_h and not pool_w:
        return x, None
    in_shape = x.shape
    choose_h = None
    if pool_h:
        x, choose_h = _pairpool_axis(x, 1)
    mid_shape = x.shape
    choose_w = None
    if pool_w:
        x, choose_w = _pairpool_axis(x, 2)
    if not want_cache:
        return x, None
    return x, (in_shape, mid_shape, choose_h, choose_w)


def maxpool_backward(dy: np.ndarray, cache):
    if cache is None:
        return dy
    in_shape, mid_shape, choose_h, choose_w = cache
    if choose_w is not None:
        dy = _pairpool_axis_backward(dy, choose_w, 2, mid_shape)
    if choose_h is not None:
        dy = _pairpool_axis_backward(dy, choose_h, 1, in_shape)
    return dy


# ---------------------------------------------------------------------------
# batch normalization: statistics over ``stat_axes``, one scale/shift pair
# per index of ``channel_axis``

def batchnorm_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
                      stat_axes: tuple, channel_axis: int, eps: float):
    """Train-mode BN using the statistics of x itself along stat_axes."""
    mu = x.mean(axis=stat_axes, keepdims=True)
    xm = x - mu
    var = np.mean(xm * xm, axis=stat_axes, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xm * inv
    shape = _channel_shape(x.ndim, channel_axis)
    y = gamma.reshape(shape) * xhat + beta.reshape(shape)
    return y, (xhat, inv, gamma, stat_axes, channel_axis, mu, var)


def batchnorm_backward(dy: np.ndarray, cache):
    xhat, inv, gamma, stat_axes, channel_axis, _, _ = cache
    shape = _channel_shape(dy.ndim, channel_axis)
    reduce_all = tuple(i for i in range(dy.ndim) if i != channel_axis)
    n = 1
    for ax in stat_axes:
        n *= dy.shape[ax]
    dgamma = (dy * xhat).sum(axis=reduce_all)
    dbeta = dy.sum(axis=reduce_all)
    dxhat = dy * gamma.reshape(shape)
    dx = (inv / n) * (n * dxhat
                      - dxhat.sum(axis=stat_axes, keepdims=True)
                      - xhat * (dxhat * xhat).sum(axis=stat_axes, keepdims=True))
    return dx, dgamma, dbeta


def batchnorm_eval_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
                           mean: np.ndarray, var: np.ndarray,
                           channel_axis: int, eps: float):
    shape = _channel_shape(x.ndim, channel_axis)
    inv = 1.0 / np.sqrt(var.reshape(shape) + eps)
    xhat = (x - mean.reshape(shape)) * inv
    y = gamma.reshape(shape) * xhat + beta.reshape(shape)
    return y, (xhat, inv, gamma, channel_axis)


def batchnorm_eval_backward(dy: np.ndarray, cache):
    xhat, inv, gamma, channel_axis = cache
    shape = _channel_shape(dy.ndim, channel_axis)
    reduce_all = tuple(i for i in range(dy.ndim) if i != channel_axis)
    dgamma = (dy * xhat).sum(axis=reduce_all)
    dbeta = dy.sum(axis=reduce_all)
    dx = dy * gamma.reshape(shape) * inv
    return dx, dgamma, dbeta


def _channel_shape(ndim: int, channel_axis: int) -> tuple:
    return tuple(-1 if i == channel_axis else 1 for i in range(ndim))


# ---------------------------------------------------------------------------
# inverted dropout

def dropout_mask(shape, rate: float, rng: np.random.Generator, dtype) -> np.ndarray | None:
    if rate <= 0.0:
        return None
    return (rng.random(shape) >= rate).astype(dtype) / (1.0 - rate)


def apply_mask(x: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    return x if mask is None else x * mask


# ---------------------------------------------------------------------------
# batched single-direction LSTM (gate order i, f, g, o), zero initial state

def lstm_forward(x: np.ndarray, w: np.ndarray, u: np.ndarray, b: np.ndarray):
    bsz, t, _ = x.shape
    hid = u.shape[0]
    xw = x @ w + b  # (B, T, 4H)
    h = np.zeros((bsz, hid), dtype=x.dtype)
    c = np.zeros((bsz, hid), dtype=x.dtype)
    hs = np.empty((bsz, t, hid), dtype=x.dtype)
    steps = []
    for k in range(t):
        z = xw[:, k] + h @ u
        i = sigmoid(z[:, :hid])
        f = sigmoid(z[:, hid:2 * hid])
        g = np.tanh(z[:, 2 * hid:3 * hid])
        o = sigmoid(z[:, 3 * hid:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        steps.append((h, c, i, f, g, o, tc))
        h = o * tc
        c = c_new
        hs[:, k] = h
    return hs, (steps, x)


def lstm_backward(dhs: np.ndarray, w: np.ndarray, u: np.ndarray, cache):
    steps, x = cache
    bsz, t, _ = x.shape
    hid = u.shape[0]
    dw = np.zeros_like(w)
    du = np.zeros_like(u)
    db = np.zeros(4 * hid, dtype=x.dtype)
    dx = np.zeros_like(x)
    dh_next = np.zeros((bsz, hid), dtype=x.dtype)
    dc_next = np.zeros((bsz, hid), dtype=x.dtype)
    for k in range(t - 1, -1, -1):
        h_prev, c_prev, i, f, g, o, tc = steps[k]
        dh = dhs[:, k] + dh_next
        do = dh * tc
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz = np.concatenate([
            dc * g * i * (1.0 - i),
            dc * c_prev * f * (1.0 - f),
            dc * i * (1.0 - g * g),
            do * o * (1.0 - o),
        ], axis=1)
        dw += x[:, k].T @ dz
        du += h_prev.T @ dz
        db += dz.sum(axis=0)
        dx[:, k] = dz @ w.T
        dh_next = dz @ u.T
        dc_next = dc * f
    return dx, dw, du, db


# ---------------------------------------------------------------------------
# row-wise softmax over attention scores, stabilized by max subtraction

def softmax_stable(e: np.ndarray) -> np.ndarray:
    if e.ndim == 1:
        ex = np.exp(e - e.max())
        return ex / ex.sum()
    ex = np.exp(e - e.max(axis=1, keepdims=True))
    return ex / ex.sum(axis=1, keepdims=True)


def softmax_backward(a: np.ndarray, da: np.ndarray) -> np.ndarray:
    if a.ndim == 1:
        return a * (da - float(a @ da))
    return a * (da - (a * da).sum(axis=1, keepdims=True))
