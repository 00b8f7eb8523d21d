"""Clip preprocessing: representation conversion, resizing, flip augmentation."""

from __future__ import annotations

import numpy as np

from ..geometry import FrustumGeometry, _axis_box_weights, _bilinear_grid
from ..synthgen import ClipLabels, VideoClip

__all__ = ["preprocess", "flip_augment"]


def _scaled_geometry(geom: FrustumGeometry, factor: float) -> FrustumGeometry:
    """Geometry in the coordinates of a uniformly box-downsampled frame.

    Target pixel centers sit at x_t = (x_s + 0.5)/factor - 0.5, so the apex
    moves by the same affine map and radii shrink by the factor.
    """
    return FrustumGeometry(
        apex_x=(geom.apex_x + 0.5) / factor - 0.5,
        apex_y=(geom.apex_y + 0.5) / factor - 0.5,
        alpha_min=geom.alpha_min,
        alpha_max=geom.alpha_max,
        r_min=geom.r_min / factor,
        r_max=geom.r_max / factor,
    )


def preprocess(clip: VideoClip, rep: str, dims: tuple[int, int]) -> VideoClip:
    """Convert a native Cartesian clip to the requested training input.

    rep="cartesian": area-average downsampling to dims (uniform scale
    required so the fan geometry stays radial).  rep="polar": scan-convert
    every frame onto an (n_angle=dims[0]) x (n_depth=dims[1]) grid.
    """
    if clip.representation != "cartesian":
        raise ValueError("preprocess expects a native Cartesian clip")
    h, w = dims
    t, src_h, src_w = clip.frames.shape
    if rep == "cartesian":
        if src_h * w != src_w * h:
            raise ValueError(
                f"cartesian resize {src_h}x{src_w} -> {h}x{w} is anisotropic")
        if h > src_h or w > src_w:
            raise ValueError("cartesian preprocessing cannot upsample")
        if (h, w) == (src_h, src_w):
            frames = clip.frames.copy()
        else:
            wh = _axis_box_weights(src_h, h)
            ww = _axis_box_weights(src_w, w)
            frames = (wh[None] @ clip.frames.astype(np.float64) @ ww.T[None])
        return VideoClip(np.clip(frames, 0.0, 1.0).astype(np.float32),
                         "cartesian", _scaled_geometry(clip.geometry, src_h / h))
    if rep == "polar":
        geom = clip.geometry
        n_angle, n_depth = h, w
        if n_angle < 2 or n_depth < 2:
            raise ValueError("polar grid needs at least 2 samples per axis")
        alphas = np.linspace(geom.alpha_min, geom.alpha_max, n_angle)
        radii = np.linspace(geom.r_min, geom.r_max, n_depth)
        aa, rr = np.meshgrid(alphas, radii, indexing="ij")
        x = geom.apex_x + rr * np.sin(aa)
        y = geom.apex_y + rr * np.cos(aa)
        frames = _bilinear_grid(clip.frames, x, y)
        return VideoClip(np.clip(frames, 0.0, 1.0).astype(np.float32), "polar", geom)
    raise ValueError(f"unknown representation {rep!r}")


def _mirror_intervals(intervals, pivot_sum: float):
    out = []
    for frame_iv in intervals:
        out.append([(pivot_sum - hi, pivot_sum - lo) for lo, hi in frame_iv])
    return out


def flip_augment(clip: VideoClip, labels: ClipLabels) -> tuple[VideoClip, ClipLabels]:
    """Horizontal mirroring about the beam axis; an involution.

    Cartesian clips flip left-right (the apex must sit at the horizontal
    center, which the generator default guarantees); polar clips reverse
    the angle axis.  Angular label intervals are mirrored about the center
    of the angular range.
    """
    geom = clip.geometry
    pivot = geom.alpha_min + geom.alpha_max
    if clip.representation == "cartesian":
        w = clip.frames.shape[2]
        if abs(geom.apex_x - (w - 1) / 2.0) > 1e-6:
            raise ValueError("cartesian flip requires a horizontally centered apex")
        frames = np.ascontiguousarray(clip.frames[:, :, ::-1])
        new_geom = FrustumGeometry(
            apex_x=geom.apex_x, apex_y=geom.apex_y,
            alpha_min=-geom.alpha_max, alpha_max=-geom.alpha_min,
            r_min=geom.r_min, r_max=geom.r_max)
        flipped = VideoClip(frames, "cartesian", new_geom)
        mirrored = _mirror_intervals(labels.bline_intervals, 0.0)
    else:
        frames = np.ascontiguousarray(clip.frames[:, ::-1, :])
        flipped = VideoClip(frames, "polar", geom)
        mirrored = _mirror_intervals(labels.bline_intervals, pivot)
    new_labels = ClipLabels(
        video_class=labels.video_class,
        frame_mask=labels.frame_mask.copy(),
        bline_intervals=mirrored,
    )
    return flipped, new_labels
