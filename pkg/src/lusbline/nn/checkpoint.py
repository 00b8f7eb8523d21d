"""Model checkpoints: length-prefixed JSON header + raw parameter payload.

Layout: 4-byte little-endian header length, UTF-8 JSON header, then every
tensor as little-endian IEEE-754 in the fixed order recorded in the
header (sorted trainable tensor names followed by sorted batch-norm
statistic names).  The header carries the architecture, tensor shapes,
dtype, and any training metadata passed by the caller.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile

import numpy as np

from .model import ArchConfig, ModelParams

__all__ = ["save_checkpoint", "load_checkpoint"]

_LE = {"float64": "<f8", "float32": "<f4"}


def _payload_order(model: ModelParams) -> list[tuple[str, str]]:
    order = [("tensor", k) for k in sorted(model.tensors)]
    order += [("bn_stat", k) for k in sorted(model.bn_stats)]
    return order


def save_checkpoint(model: ModelParams, path: str, metadata: dict | None = None) -> None:
    dtype = str(model.dtype)
    header = {
        "format": "lusbline-checkpoint-v1",
        "arch": model.arch.to_dict(),
        "dtype": dtype,
        "tensors": {k: list(v.shape) for k, v in model.tensors.items()},
        "bn_stats": {k: list(v.shape) for k, v in model.bn_stats.items()},
        "metadata": metadata or {},
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = bytearray()
    blob += struct.pack("<I", len(head))
    blob += head
    for kind, name in _payload_order(model):
        arr = model.tensors[name] if kind == "tensor" else model.bn_stats[name]
        blob += np.ascontiguousarray(arr, dtype=_LE[dtype]).tobytes()
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(bytes(blob))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str) -> tuple[ModelParams, dict]:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 4:
        raise ValueError("checkpoint truncated: missing header length")
    (hlen,) = struct.unpack("<I", raw[:4])
    if len(raw) < 4 + hlen:
        raise ValueError("checkpoint truncated: incomplete header")
    header = json.loads(raw[4:4 + hlen].decode("utf-8"))
    if header.get("format") != "lusbline-checkpoint-v1":
        raise ValueError(f"unknown checkpoint format {header.get('format')!r}")
    dtype = header["dtype"]
    if dtype not in _LE:
        raise ValueError(f"unsupported checkpoint dtype {dtype!r}")
    arch = ArchConfig.from_dict(header["arch"])
    itemsize = np.dtype(_LE[dtype]).itemsize
    offset = 4 + hlen
    tensors: dict[str, np.ndarray] = {}
    bn_stats: dict[str, np.ndarray] = {}
    order = [("tensor", k) for k in sorted(header["tensors"])]
    order += [("bn_stat", k) for k in sorted(header["bn_stats"])]
    for kind, name in order:
        shape = tuple(header["tensors" if kind == "tensor" else "bn_stats"][name])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * itemsize
        if offset + nbytes > len(raw):
            raise ValueError(f"checkpoint truncated in tensor {name!r}")
        arr = np.frombuffer(raw[offset:offset + nbytes], dtype=_LE[dtype]).reshape(shape)
        arr = arr.astype(np.dtype(dtype))
        (tensors if kind == "tensor" else bn_stats)[name] = arr
        offset += nbytes
    if offset != len(raw):
        raise ValueError("checkpoint has trailing bytes after the payload")
    return ModelParams(arch, tensors, bn_stats), header["metadata"]
