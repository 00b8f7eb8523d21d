"""Frustum geometry, polar/Cartesian point mappings, and frame resampling.

Coordinate conventions
----------------------
Cartesian frames are stored row-major with pixel (x, y) meaning
(column, row).  The beam apex sits at ``(apex_x, apex_y)`` and the angle
``alpha`` is measured from the downward vertical axis (y grows with row
index), so ``alpha = 0`` points straight down the image:

    x = apex_x + r * sin(alpha)
    y = apex_y + r * cos(alpha)

Polar frames are angle-major: ``pixels[i, j]`` is the sample at the i-th
angle and j-th depth, with both axes uniformly partitioned including the
endpoints.  All geometry math runs in float64; frame storage is float32.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "RENDER_MARGIN",
    "FrustumGeometry",
    "CartesianFrame",
    "PolarFrame",
    "default_geometry",
    "frustum_mask",
    "polar_to_cartesian_point",
    "cartesian_to_polar_point",
    "bilinear_sample",
    "scan_convert_to_polar",
    "scan_convert_to_cartesian",
    "downsample",
    "roundtrip_rmse",
]


# Rendering dilation (pixels) so that bilinear samples taken exactly on the
# frustum boundary only read rendered values: diagonal neighbors of a boundary
# sample sit up to sqrt(2) px away.
RENDER_MARGIN = 1.5


@dataclass(frozen=True)
class FrustumGeometry:
    """Fan-shaped imaging footprint shared by both representations.

    apex_x, apex_y: beam-source position in Cartesian pixel coordinates.
    alpha_min, alpha_max: angular extent in radians from the downward
        vertical axis (negative = left of the apex).
    r_min, r_max: radial extent in Cartesian pixel units.
    """

    apex_x: float
    apex_y: float
    alpha_min: float
    alpha_max: float
    r_min: float
    r_max: float

    def __post_init__(self):
        if not self.alpha_min < self.alpha_max:
            raise ValueError(f"alpha_min {self.alpha_min} must be < alpha_max {self.alpha_max}")
        if not (0.0 <= self.r_min < self.r_max):
            raise ValueError(f"need 0 <= r_min < r_max, got [{self.r_min}, {self.r_max}]")

    @property
    def alpha_span(self) -> float:
        return self.alpha_max - self.alpha_min

    def to_dict(self) -> dict:
        return {
            "apex_x": self.apex_x,
            "apex_y": self.apex_y,
            "alpha_min": self.alpha_min,
            "alpha_max": self.alpha_max,
            "r_min": self.r_min,
            "r_max": self.r_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FrustumGeometry":
        return cls(**{k: float(d[k]) for k in
                      ("apex_x", "apex_y", "alpha_min", "alpha_max", "r_min", "r_max")})


def default_geometry(height: int, width: int, half_angle: float = np.pi / 6,
                     r_min: float = 4.0) -> FrustumGeometry:
    """Convex-probe-like sector: apex at top-center, +-30 degrees by default.

    r_max is height - 1 so the footprint exactly inscribes the frame.
    """
    return FrustumGeometry(
        apex_x=(width - 1) / 2.0,
        apex_y=0.0,
        alpha_min=-half_angle,
        alpha_max=half_angle,
        r_min=r_min,
        r_max=float(height - 1),
    )


@dataclass
class CartesianFrame:
    """Scan-converted image: intensities plus an inside-frustum mask.

    Out-of-mask pixels are exactly 0; in-mask intensities lie in [0, 1].
    """

    height: int
    width: int
    pixels: np.ndarray  # (height, width) float32
    mask: np.ndarray    # (height, width) bool

    @classmethod
    def from_array(cls, pixels: np.ndarray, mask: np.ndarray) -> "CartesianFrame":
        pixels = np.asarray(pixels, dtype=np.float32)
        mask = np.asarray(mask, dtype=bool)
        if pixels.shape != mask.shape or pixels.ndim != 2:
            raise ValueError(f"pixels {pixels.shape} and mask {mask.shape} must be equal 2-D shapes")
        return cls(pixels.shape[0], pixels.shape[1], pixels, mask)


@dataclass
class PolarFrame:
    """Angle-major resampled image: pixels[i, j] = (angle_i, depth_j)."""

    n_angle: int
    n_depth: int
    pixels: np.ndarray  # (n_angle, n_depth) float32

    @classmethod
    def from_array(cls, pixels: np.ndarray) -> "PolarFrame":
        pixels = np.asarray(pixels, dtype=np.float32)
        if pixels.ndim != 2:
            raise ValueError(f"polar pixels must be 2-D, got shape {pixels.shape}")
        return cls(pixels.shape[0], pixels.shape[1], pixels)


def polar_to_cartesian_point(r, alpha, geom: FrustumGeometry):
    """Map (r, alpha) to Cartesian (x, y). Accepts scalars or arrays.

    Raises ValueError when any input lies outside the frustum ranges.
    """
    r = np.asarray(r, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    eps = 1e-12
    if np.any(r < geom.r_min - eps) or np.any(r > geom.r_max + eps):
        raise ValueError(f"radius outside [{geom.r_min}, {geom.r_max}]")
    if np.any(alpha < geom.alpha_min - eps) or np.any(alpha > geom.alpha_max + eps):
        raise ValueError(f"angle outside [{geom.alpha_min}, {geom.alpha_max}]")
    x = geom.apex_x + r * np.sin(alpha)
    y = geom.apex_y + r * np.cos(alpha)
    if x.ndim == 0:
        return float(x), float(y)
    return x, y


def cartesian_to_polar_point(x, y, geom: FrustumGeometry):
    """Inverse mapping: (x, y) to (r, alpha), alpha = 0 at the apex.

    The apex itself has undefined angle; it is returned as alpha = 0.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dx = x - geom.apex_x
    dy = y - geom.apex_y
    r = np.hypot(dx, dy)
    alpha = np.where(r > 0.0, np.arctan2(dx, np.where(r > 0.0, dy, 1.0)), 0.0)
    if r.ndim == 0:
        return float(r), float(alpha)
    return r, alpha


def frustum_mask(geom: FrustumGeometry, height: int, width: int,
                 margin: float = 0.0) -> np.ndarray:
    """Boolean mask of pixels whose centers fall inside the frustum.

    ``margin`` (pixels) dilates the footprint: the radial range widens by
    margin and the angular range by margin/r.  Generators render with a
    one-pixel margin so that bilinear samples taken exactly on the frustum
    boundary only ever read rendered values.
    """
    yy, xx = np.mgrid[0:height, 0:width]
    r, alpha = cartesian_to_polar_point(xx.astype(np.float64), yy.astype(np.float64), geom)
    ang_margin = margin / np.maximum(r, 1.0)
    return (
        (r >= geom.r_min - margin)
        & (r <= geom.r_max + margin)
        & (alpha >= geom.alpha_min - ang_margin)
        & (alpha <= geom.alpha_max + ang_margin)
    )


def _bilinear_grid(pixels: np.ndarray, u, v):
    """Bilinear blend on a raw grid; u indexes the last axis, v the one
    before it.  A leading frame axis is broadcast (pixels may be (T, H, W)).

    Coordinates outside [0, W-1] x [0, H-1] return 0.
    """
    h, w = pixels.shape[-2:]
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    inside = (u >= 0.0) & (u <= w - 1.0) & (v >= 0.0) & (v <= h - 1.0)
    uc = np.clip(u, 0.0, w - 1.0)
    vc = np.clip(v, 0.0, h - 1.0)
    u0 = np.floor(uc).astype(np.intp)
    v0 = np.floor(vc).astype(np.intp)
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    fu = uc - u0
    fv = vc - v0
    p = pixels.astype(np.float64, copy=False)
    out = (
        p[..., v0, u0] * (1.0 - fv) * (1.0 - fu)
        + p[..., v0, u1] * (1.0 - fv) * fu
        + p[..., v1, u0] * fv * (1.0 - fu)
        + p[..., v1, u1] * fv * fu
    )
    return np.where(inside, out, 0.0)


def bilinear_sample(frame, u, v):
    """Sample a CartesianFrame or PolarFrame at continuous coordinates.

    ``u`` runs along the second pixel axis (x / depth), ``v`` along the
    first (y / angle).  Exact at integer coordinates; out-of-grid
    coordinates return 0.  Total function, accepts scalars or arrays.
    """
    pixels = frame.pixels if hasattr(frame, "pixels") else np.asarray(frame)
    out = _bilinear_grid(pixels, u, v)
    if out.ndim == 0:
        return float(out)
    return out


def _polar_axes(geom: FrustumGeometry, n_angle: int, n_depth: int):
    if n_angle < 2 or n_depth < 2:
        raise ValueError(f"polar grid needs n_angle, n_depth >= 2, got {n_angle}x{n_depth}")
    alphas = np.linspace(geom.alpha_min, geom.alpha_max, n_angle)
    radii = np.linspace(geom.r_min, geom.r_max, n_depth)
    return alphas, radii


def scan_convert_to_polar(frame: CartesianFrame, geom: FrustumGeometry,
                          n_angle: int, n_depth: int) -> PolarFrame:
    """Resample a Cartesian frame onto a uniform (angle x depth) grid."""
    alphas, radii = _polar_axes(geom, n_angle, n_depth)
    aa, rr = np.meshgrid(alphas, radii, indexing="ij")
    x = geom.apex_x + rr * np.sin(aa)
    y = geom.apex_y + rr * np.cos(aa)
    out = _bilinear_grid(frame.pixels, x, y)
    return PolarFrame(n_angle, n_depth, out.astype(np.float32))


def scan_convert_to_cartesian(frame: PolarFrame, geom: FrustumGeometry,
                              height: int, width: int) -> CartesianFrame:
    """Resample a polar frame back to the Cartesian display grid.

    Pixels outside the frustum are 0 with mask=False.
    """
    if frame.n_angle < 2 or frame.n_depth < 2:
        raise ValueError("polar frame too small to resample")
    yy, xx = np.mgrid[0:height, 0:width]
    r, alpha = cartesian_to_polar_point(xx.astype(np.float64), yy.astype(np.float64), geom)
    inside = (
        (r >= geom.r_min) & (r <= geom.r_max)
        & (alpha >= geom.alpha_min) & (alpha <= geom.alpha_max)
    )
    # fractional grid indices of (alpha, r) on the uniform polar axes
    fi = (alpha - geom.alpha_min) / geom.alpha_span * (frame.n_angle - 1)
    fj = (r - geom.r_min) / (geom.r_max - geom.r_min) * (frame.n_depth - 1)
    vals = _bilinear_grid(frame.pixels, fj, fi)
    pixels = np.where(inside, vals, 0.0).astype(np.float32)
    return CartesianFrame(height, width, pixels, inside)


def _axis_box_weights(src: int, dst: int) -> np.ndarray:
    """(dst, src) row-stochastic matrix of interval-overlap box weights."""
    w = np.zeros((dst, src), dtype=np.float64)
    scale = src / dst
    for i in range(dst):
        lo = i * scale
        hi = (i + 1) * scale
        j0 = int(np.floor(lo))
        j1 = int(np.ceil(hi))
        for j in range(j0, min(j1, src)):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 0:
                w[i, j] = overlap / scale
    return w


def _downsample_array(pixels: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    src_h, src_w = pixels.shape
    if target_h > src_h or target_w > src_w:
        raise ValueError(f"cannot upsample {src_h}x{src_w} to {target_h}x{target_w}")
    wh = _axis_box_weights(src_h, target_h)
    ww = _axis_box_weights(src_w, target_w)
    return wh @ pixels.astype(np.float64) @ ww.T


def downsample(frame, target_h: int, target_w: int):
    """Area-average (box filter) downsampling; preserves the mean when the
    target dimensions divide the source dimensions exactly."""
    if isinstance(frame, PolarFrame):
        out = _downsample_array(frame.pixels, target_h, target_w)
        return PolarFrame(target_h, target_w, out.astype(np.float32))
    if isinstance(frame, CartesianFrame):
        out = _downsample_array(frame.pixels, target_h, target_w)
        mask_frac = _downsample_array(frame.mask.astype(np.float64), target_h, target_w)
        return CartesianFrame(target_h, target_w, out.astype(np.float32), mask_frac > 0.0)
    out = _downsample_array(np.asarray(frame, dtype=np.float64), target_h, target_w)
    return out


def roundtrip_rmse(frame: CartesianFrame, geom: FrustumGeometry,
                   n_angle: int, n_depth: int) -> float:
    """RMSE over strictly in-frustum pixels of the cart->polar->cart trip."""
    polar = scan_convert_to_polar(frame, geom, n_angle, n_depth)
    back = scan_convert_to_cartesian(polar, geom, frame.height, frame.width)
    mask = frustum_mask(geom, frame.height, frame.width)
    if not mask.any():
        raise ValueError("empty frustum mask: geometry does not intersect the frame")
    diff = frame.pixels.astype(np.float64)[mask] - back.pixels.astype(np.float64)[mask]
    return float(np.sqrt(np.mean(diff * diff)))
