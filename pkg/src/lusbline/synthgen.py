"""Deterministic generator of frustum-shaped ultrasound-like video clips.

Each clip is rendered at a native Cartesian resolution from analytic
ingredients evaluated on the per-pixel (r, alpha) map:

* depth-attenuated background brightness,
* a bright pleural arc at ``pleural_depth``,
* horizontal reverberation arcs (A-line stand-ins) in non-B-line clips,
* optionally 1..N B-line rays: Gaussian angular profiles (``bline_width``
  is the full width at half maximum) running from the pleural line to the
  maximum depth, each visible during one contiguous run of frames,
* multiplicative speckle noise.

Generation is a pure function of (config, seed); labels are derived from
exactly what was rendered.  Per-clip seeds come from ``seeds.child_seed``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    RENDER_MARGIN,
    FrustumGeometry,
    cartesian_to_polar_point,
    default_geometry,
    frustum_mask,
)
from .seeds import child_seed

__all__ = [
    "PhantomConfig",
    "ClipLabels",
    "VideoClip",
    "generate_clip",
    "generate_dataset",
    "speckle",
    "render_bline_ray",
]

# Gaussian FWHM = 2 sqrt(2 ln 2) sigma
_FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))

# Radial profile widths (native pixels) of the bright arcs.
_PLEURAL_SIGMA = 1.6
_ALINE_SIGMA = 2.4
# Per-clip brightness jitter range (multiplicative) so class labels cannot
# be read off the global mean alone.
_JITTER = (0.85, 1.15)


@dataclass(frozen=True)
class PhantomConfig:
    """Knobs of the synthetic clip generator."""

    frames_per_clip: int = 32
    native_h: int = 128
    native_w: int = 128
    geometry: FrustumGeometry | None = None
    bline_probability: float = 0.5
    blines_per_clip: tuple[int, int] = (1, 3)
    bline_width: float = 0.035           # angular FWHM, radians
    bline_intensity: float = 0.55        # peak added brightness
    flicker_on_fraction: float = 0.5     # fraction of frames a line is visible
    speckle_variance: float = 0.02       # multiplicative noise variance
    pleural_depth: float = 24.0          # native pixels from the apex
    a_line_count: int = 3
    base_brightness: float = 0.30
    pleural_amplitude: float = 0.45
    aline_amplitude: float = 0.30

    def __post_init__(self):
        if self.frames_per_clip < 2:
            raise ValueError("frames_per_clip must be >= 2")
        for name in ("bline_probability", "flicker_on_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if not 0.0 <= self.bline_intensity <= 1.0:
            raise ValueError("bline_intensity must be in [0, 1]")
        if self.speckle_variance < 0.0:
            raise ValueError("speckle_variance must be >= 0")
        lo, hi = self.blines_per_clip
        if not (1 <= lo <= hi):
            raise ValueError(f"invalid blines_per_clip range {self.blines_per_clip}")
        if self.geometry is None:
            object.__setattr__(self, "geometry",
                               default_geometry(self.native_h, self.native_w))
        geom = self.resolved_geometry()
        if not self.bline_width < geom.alpha_span / 2.0:
            raise ValueError("bline_width must be < half the angular span")
        if not geom.r_min <= self.pleural_depth < geom.r_max:
            raise ValueError("pleural_depth must lie inside the radial range")

    def resolved_geometry(self) -> FrustumGeometry:
        return self.geometry  # always set after __post_init__

    def to_dict(self) -> dict:
        d = {
            "frames_per_clip": self.frames_per_clip,
            "native_h": self.native_h,
            "native_w": self.native_w,
            "geometry": self.resolved_geometry().to_dict(),
            "bline_probability": self.bline_probability,
            "blines_per_clip": list(self.blines_per_clip),
            "bline_width": self.bline_width,
            "bline_intensity": self.bline_intensity,
            "flicker_on_fraction": self.flicker_on_fraction,
            "speckle_variance": self.speckle_variance,
            "pleural_depth": self.pleural_depth,
            "a_line_count": self.a_line_count,
            "base_brightness": self.base_brightness,
            "pleural_amplitude": self.pleural_amplitude,
            "aline_amplitude": self.aline_amplitude,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomConfig":
        d = dict(d)
        if d.get("geometry") is not None:
            d["geometry"] = FrustumGeometry.from_dict(d["geometry"])
        if "blines_per_clip" in d:
            d["blines_per_clip"] = tuple(d["blines_per_clip"])
        return cls(**d)


@dataclass
class ClipLabels:
    """Ground truth emitted alongside each generated clip.

    video_class is "bline" iff at least one frame shows a B-line;
    bline_intervals[t] lists the (alpha_lo, alpha_hi) FWHM intervals of the
    rays visible in frame t.
    """

    video_class: str
    frame_mask: np.ndarray  # (T,) bool
    bline_intervals: list[list[tuple[float, float]]]

    def to_dict(self) -> dict:
        return {
            "video_class": self.video_class,
            "frame_mask": [bool(b) for b in self.frame_mask],
            "bline_intervals": [[[float(lo), float(hi)] for lo, hi in iv]
                                for iv in self.bline_intervals],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClipLabels":
        return cls(
            video_class=str(d["video_class"]),
            frame_mask=np.asarray(d["frame_mask"], dtype=bool),
            bline_intervals=[[(float(lo), float(hi)) for lo, hi in iv]
                             for iv in d["bline_intervals"]],
        )


@dataclass
class VideoClip:
    """T frames sharing one representation and frustum geometry."""

    frames: np.ndarray  # (T, H, W) float32 in [0, 1]
    representation: str  # "cartesian" | "polar"
    geometry: FrustumGeometry

    def __post_init__(self):
        if self.frames.ndim != 3:
            raise ValueError(f"frames must be (T, H, W), got shape {self.frames.shape}")
        if self.representation not in ("cartesian", "polar"):
            raise ValueError(f"unknown representation {self.representation!r}")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dims(self) -> tuple[int, int]:
        return self.frames.shape[1], self.frames.shape[2]


def speckle(frame: np.ndarray, variance: float, rng: np.random.Generator) -> np.ndarray:
    """Multiplicative noise frame*(1+eta), eta ~ N(0, variance), clamped to [0,1].

    variance 0 is the identity (no rng draw is consumed).
    """
    if variance < 0:
        raise ValueError("variance must be >= 0")
    frame = np.asarray(frame, dtype=np.float64)
    if variance == 0.0:
        return frame.copy()
    eta = rng.normal(0.0, math.sqrt(variance), size=frame.shape)
    return np.clip(frame * (1.0 + eta), 0.0, 1.0)


def render_bline_ray(geom: FrustumGeometry, height: int, width: int,
                     alpha0: float, fwhm: float, intensity: float,
                     r_start: float) -> np.ndarray:
    """Additive brightness field of one B-line ray on the Cartesian grid.

    Gaussian profile across the angle (FWHM = ``fwhm``), constant along the
    radius from ``r_start`` outward, zero above the starting depth.
    """
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    r, alpha = cartesian_to_polar_point(xx, yy, geom)
    sigma = fwhm * _FWHM_TO_SIGMA
    profile = intensity * np.exp(-((alpha - alpha0) ** 2) / (2.0 * sigma * sigma))
    return np.where(r >= r_start, profile, 0.0)


def _radial_arc(r: np.ndarray, depth: float, amplitude: float, sigma: float) -> np.ndarray:
    return amplitude * np.exp(-((r - depth) ** 2) / (2.0 * sigma * sigma))


def generate_clip(config: PhantomConfig, seed: int) -> tuple[VideoClip, ClipLabels]:
    """Render one clip and its exact labels as a pure function of (config, seed).

    rng draw order: class coin, three brightness jitters, then for B-line
    clips the line count, per-line angle and flicker start, then one
    speckle field per frame.
    """
    geom = config.resolved_geometry()
    h, w, t_count = config.native_h, config.native_w, config.frames_per_clip
    rng = np.random.default_rng(seed & ((1 << 64) - 1))

    is_bline = bool(rng.random() < config.bline_probability)
    base_jit, pleural_jit, aline_jit = rng.uniform(*_JITTER, size=3)

    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    r, alpha = cartesian_to_polar_point(xx, yy, geom)
    render_mask = frustum_mask(geom, h, w, margin=RENDER_MARGIN)

    attenuation = 0.75 * (geom.r_max - geom.r_min)
    still = config.base_brightness * base_jit * np.exp(-(r - geom.r_min) / attenuation)
    still = still + _radial_arc(r, config.pleural_depth,
                                config.pleural_amplitude * pleural_jit, _PLEURAL_SIGMA)
    if not is_bline:
        for k in range(1, config.a_line_count + 1):
            depth = (k + 1) * config.pleural_depth
            if depth > geom.r_max - 2.0:
                break
            amp = config.aline_amplitude * aline_jit * (0.65 ** (k - 1))
            still = still + _radial_arc(r, depth, amp, _ALINE_SIGMA)

    rays: list[np.ndarray] = []
    runs: list[tuple[int, int]] = []
    intervals: list[tuple[float, float]] = []
    if is_bline:
        lo, hi = config.blines_per_clip
        n_lines = int(rng.integers(lo, hi + 1))
        on_len = max(1, math.ceil(config.flicker_on_fraction * t_count))
        sigma = config.bline_width * _FWHM_TO_SIGMA
        for _ in range(n_lines):
            a0 = float(rng.uniform(geom.alpha_min + config.bline_width,
                                   geom.alpha_max - config.bline_width))
            start = int(rng.integers(0, t_count - on_len + 1))
            profile = config.bline_intensity * np.exp(
                -((alpha - a0) ** 2) / (2.0 * sigma * sigma))
            rays.append(np.where(r >= config.pleural_depth, profile, 0.0))
            runs.append((start, start + on_len))
            intervals.append((a0 - config.bline_width / 2.0, a0 + config.bline_width / 2.0))

    frames = np.empty((t_count, h, w), dtype=np.float32)
    frame_mask = np.zeros(t_count, dtype=bool)
    frame_intervals: list[list[tuple[float, float]]] = []
    for t in range(t_count):
        field_t = still
        visible = [i for i, (s, e) in enumerate(runs) if s <= t < e]
        for i in visible:
            field_t = field_t + rays[i]
        field_t = speckle(field_t, config.speckle_variance, rng)
        frames[t] = np.where(render_mask, np.clip(field_t, 0.0, 1.0), 0.0)
        frame_mask[t] = bool(visible)
        frame_intervals.append([intervals[i] for i in visible])

    labels = ClipLabels(
        video_class="bline" if frame_mask.any() else "non_bline",
        frame_mask=frame_mask,
        bline_intervals=frame_intervals,
    )
    return VideoClip(frames, "cartesian", geom), labels


def generate_dataset(config: PhantomConfig, n_clips: int,
                     seed: int) -> list[tuple[VideoClip, ClipLabels]]:
    """n_clips independent clips; clip i uses child_seed(seed, i)."""
    if n_clips < 1:
        raise ValueError("n_clips must be >= 1")
    return [generate_clip(config, child_seed(seed, i)) for i in range(n_clips)]
