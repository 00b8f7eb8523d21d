"""LUSV1 dataset container: binary frames + JSON sidecar manifest.

Binary layout (all little-endian):
    5 bytes  magic b"LUSV1"
    u32      clip count
    per clip:
        u32 T, u32 H, u32 W
        u8  representation flag (0 = cartesian, 1 = polar)
        T*H*W float32 frames, row-major

The sidecar at ``<path>.json`` holds per-clip labels, the shared
geometry, the generator config and master seed when known, and a 64-bit
BLAKE2b checksum of the binary payload so regenerated or corrupted data
is detectable.  Writes are atomic (temp file + rename).
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile

import numpy as np

from ..geometry import FrustumGeometry
from ..synthgen import ClipLabels, VideoClip

__all__ = ["FormatError", "save_dataset", "load_dataset", "manifest_path", "payload_checksum"]

_MAGIC = b"LUSV1"
_REP_FLAGS = {"cartesian": 0, "polar": 1}
_REP_NAMES = {0: "cartesian", 1: "polar"}


class FormatError(ValueError):
    """Raised when a container or manifest field is malformed."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


def manifest_path(path: str) -> str:
    return path + ".json"


def payload_checksum(blob: bytes) -> str:
    """64-bit BLAKE2b digest, hex-encoded."""
    return hashlib.blake2b(blob, digest_size=8).hexdigest()


def _atomic_write(path: str, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_dataset(clips_labels, path: str, phantom_config: dict | None = None,
                 seed: int | None = None, extra: dict | None = None) -> None:
    """Write clips + labels; all clips must share geometry and representation."""
    if not clips_labels:
        raise ValueError("dataset must contain at least one clip")
    geom = clips_labels[0][0].geometry
    rep = clips_labels[0][0].representation
    blob = bytearray()
    blob += _MAGIC
    blob += struct.pack("<I", len(clips_labels))
    for clip, _ in clips_labels:
        if clip.geometry != geom:
            raise ValueError("clips in one dataset must share geometry")
        if clip.representation != rep:
            raise ValueError("clips in one dataset must share representation")
        t, h, w = clip.frames.shape
        blob += struct.pack("<IIIB", t, h, w, _REP_FLAGS[clip.representation])
        blob += np.ascontiguousarray(clip.frames, dtype="<f4").tobytes()
    manifest = {
        "format": "LUSV1",
        "n_clips": len(clips_labels),
        "representation": rep,
        "geometry": geom.to_dict(),
        "generator": phantom_config,
        "master_seed": seed,
        "rng": "numpy PCG64 seeded by splitmix64(master + (i+1)*0x9E3779B97F4A7C15)",
        "payload_checksum": payload_checksum(bytes(blob)),
        "clips": [labels.to_dict() for _, labels in clips_labels],
    }
    if extra:
        manifest["extra"] = extra
    _atomic_write(path, bytes(blob))
    _atomic_write(manifest_path(path),
                  json.dumps(manifest, sort_keys=True, indent=2).encode("utf-8") + b"\n")


def load_dataset(path: str):
    """Read a container; returns (list of (VideoClip, ClipLabels), manifest)."""
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as exc:
        raise FormatError("file", f"cannot read container: {exc}") from exc
    try:
        with open(manifest_path(path), "r", encoding="utf-8") as f:
            manifest = json.load(f)
    except OSError as exc:
        raise FormatError("manifest", f"cannot read sidecar: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError("manifest", f"invalid JSON: {exc}") from exc

    if raw[:5] != _MAGIC:
        raise FormatError("magic", f"expected {_MAGIC!r}, got {raw[:5]!r}")
    if manifest.get("format") != "LUSV1":
        raise FormatError("manifest.format", f"unexpected {manifest.get('format')!r}")
    stored_sum = manifest.get("payload_checksum")
    actual_sum = payload_checksum(raw)
    if stored_sum != actual_sum:
        raise FormatError("payload_checksum",
                          f"manifest says {stored_sum}, payload hashes to {actual_sum}")
    offset = 5
    if len(raw) < offset + 4:
        raise FormatError("n_clips", "container truncated before clip count")
    (n_clips,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    if manifest.get("n_clips") != n_clips:
        raise FormatError("n_clips",
                          f"manifest says {manifest.get('n_clips')}, container has {n_clips}")
    label_dicts = manifest.get("clips")
    if not isinstance(label_dicts, list) or len(label_dicts) != n_clips:
        raise FormatError("clips", "manifest clip labels missing or wrong length")
    try:
        geom = FrustumGeometry.from_dict(manifest["geometry"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError("geometry", f"invalid geometry block: {exc}") from exc

    out = []
    for i in range(n_clips):
        if len(raw) < offset + 13:
            raise FormatError(f"clips[{i}].header", "container truncated in clip header")
        t, h, w, flag = struct.unpack_from("<IIIB", raw, offset)
        offset += 13
        if flag not in _REP_NAMES:
            raise FormatError(f"clips[{i}].representation", f"unknown flag {flag}")
        nbytes = t * h * w * 4
        if len(raw) < offset + nbytes:
            raise FormatError(f"clips[{i}].frames",
                              f"expected {nbytes} bytes, got {len(raw) - offset}")
        frames = np.frombuffer(raw[offset:offset + nbytes], dtype="<f4").reshape(t, h, w)
        offset += nbytes
        try:
            labels = ClipLabels.from_dict(label_dicts[i])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"clips[{i}].labels", f"invalid labels: {exc}") from exc
        if labels.frame_mask.size != t:
            raise FormatError(f"clips[{i}].labels",
                              f"frame_mask length {labels.frame_mask.size} != T {t}")
        out.append((VideoClip(frames.astype(np.float32), _REP_NAMES[flag], geom), labels))
    if offset != len(raw):
        raise FormatError("payload", f"{len(raw) - offset} trailing bytes after last clip")
    return out, manifest
