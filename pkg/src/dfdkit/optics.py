"""Thin-lens defocus model.

A point at object distance d in front of a thin lens focused at distance
d_focus spreads over a disc on the sensor (the circle of confusion) whose
diameter is

    eps(d) = D * s * |1/f - 1/d - 1/s|,

where f is the focal length, s the lens-to-sensor distance, and
D = f / f_number the aperture diameter.  Using the conjugation identity
1/f = 1/s + 1/d_focus this is equivalently

    eps(d) = (f / N) * s * |1/d_focus - 1/d|,

i.e. blur is linear in inverse depth, zero at the in-focus plane, and the
same diameter occurs at one depth on each side of it (the near/far
ambiguity).  All distances are object-side meters; blur is meters on the
sensor, or pixels after dividing by the pixel pitch.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CameraConfig",
    "BlurCurve",
    "sensor_distance_for_focus",
    "blur_diameter",
    "blur_diameter_px",
    "signed_blur_px",
    "invert_blur",
    "depth_of_field",
    "blur_curve",
]


def sensor_distance_for_focus(focal_length: float, focus_distance: float) -> float:
    """Lens-to-sensor distance s that focuses objects at `focus_distance`.

    Solves the thin-lens equation 1/f = 1/s + 1/d for s:
    s = f * d / (d - f).

    Raises
    ------
    ValueError
        If focus_distance <= focal_length (no real image) or focal_length <= 0.
    """
    if focal_length <= 0:
        raise ValueError(f"focal length must be positive, got {focal_length}")
    if focus_distance <= focal_length:
        raise ValueError(
            f"focus distance ({focus_distance} m) must exceed the focal "
            f"length ({focal_length} m); no real image otherwise"
        )
    return focal_length * focus_distance / (focus_distance - focal_length)


@dataclass(frozen=True)
class CameraConfig:
    """Thin-lens camera: focal length f, f-number N, pixel pitch, focus distance.

    The sensor distance and aperture diameter are derived, never set
    directly, so the parameter set can never be mutually inconsistent.
    All lengths in meters.
    """

    focal_length: float
    f_number: float
    pixel_pitch: float
    focus_distance: float

    def __post_init__(self):
        if self.focal_length <= 0:
            raise ValueError(f"focal_length must be > 0, got {self.focal_length}")
        if self.f_number <= 0:
            raise ValueError(f"f_number must be > 0, got {self.f_number}")
        if self.pixel_pitch <= 0:
            raise ValueError(f"pixel_pitch must be > 0, got {self.pixel_pitch}")
        if self.focus_distance <= self.focal_length:
            raise ValueError(
                f"focus_distance ({self.focus_distance}) must exceed "
                f"focal_length ({self.focal_length})"
            )

    @property
    def sensor_distance(self) -> float:
        """Lens-to-sensor distance s from the thin-lens conjugation."""
        return sensor_distance_for_focus(self.focal_length, self.focus_distance)

    @property
    def aperture_diameter(self) -> float:
        """Aperture diameter D = f / N."""
        return self.focal_length / self.f_number

    def to_dict(self) -> dict:
        return {
            "focal_length_m": self.focal_length,
            "f_number": self.f_number,
            "pixel_pitch_m": self.pixel_pitch,
            "focus_distance_m": self.focus_distance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraConfig":
        return cls(
            focal_length=float(d["focal_length_m"]),
            f_number=float(d["f_number"]),
            pixel_pitch=float(d["pixel_pitch_m"]),
            focus_distance=float(d["focus_distance_m"]),
        )


def blur_diameter(config: CameraConfig, depth):
    """Blur-circle diameter in meters at object distance `depth`.

    eps = D * s * |1/f - 1/depth - 1/s|, evaluated through the conjugation
    identity as D * s * |1/d_focus - 1/depth|, which is algebraically equal
    and stays exact (zero) at the focus distance where the raw form loses
    all significance to cancellation.  Accepts a scalar or an ndarray of
    depths; all must be > 0.
    """
    d = np.asarray(depth, dtype=float)
    if np.any(d <= 0):
        raise ValueError("depth must be > 0")
    s = config.sensor_distance
    D = config.aperture_diameter
    eps = D * s * np.abs(1.0 / config.focus_distance - 1.0 / d)
    return float(eps) if np.isscalar(depth) or d.ndim == 0 else eps


def blur_diameter_px(config: CameraConfig, depth):
    """Blur-circle diameter in pixels: blur_diameter / pixel_pitch."""
    return blur_diameter(config, depth) / config.pixel_pitch


def signed_blur_px(config: CameraConfig, depth):
    """Signed blur in pixels: negative in front of the focus plane, positive behind.

    Equal-magnitude blurs on opposite sides of the focus plane get opposite
    signs, which is what lets depth layering keep them apart.
    """
    d = np.asarray(depth, dtype=float)
    if np.any(d <= 0):
        raise ValueError("depth must be > 0")
    s = config.sensor_distance
    D = config.aperture_diameter
    val = D * s * (1.0 / config.focus_distance - 1.0 / d) / config.pixel_pitch
    return float(val) if np.isscalar(depth) or d.ndim == 0 else val


def invert_blur(config: CameraConfig, blur: float) -> tuple[float, float]:
    """Depths on either side of the focus plane producing the given blur (meters).

    Solves 1/d = 1/d_focus +/- blur / (D*s).  Returns (near, far) with
    near < d_focus <= far.  When blur >= D*s/d_focus the far branch has no
    bounded solution and is reported as math.inf.  blur == 0 returns the
    focus distance twice.
    """
    if blur < 0:
        raise ValueError(f"blur must be >= 0, got {blur}")
    d_focus = config.focus_distance
    if blur == 0:
        return d_focus, d_focus
    beta = blur / (config.aperture_diameter * config.sensor_distance)
    near = 1.0 / (1.0 / d_focus + beta)
    inv_far = 1.0 / d_focus - beta
    far = math.inf if inv_far <= 0 else 1.0 / inv_far
    return near, far


def depth_of_field(config: CameraConfig, threshold_px: float) -> tuple[float, float]:
    """Depth interval around focus where blur stays below `threshold_px` pixels.

    This is the dead zone of single-image depth from defocus: inside it the
    blur carries no measurable depth signal.  The far limit is math.inf when
    the depth of field extends beyond all finite depths.
    """
    if threshold_px <= 0:
        raise ValueError(f"threshold_px must be > 0, got {threshold_px}")
    return invert_blur(config, threshold_px * config.pixel_pitch)


@dataclass(frozen=True)
class BlurCurve:
    """Sampled blur-vs-depth curve: parallel arrays of depth, blur (m), blur (px)."""

    depth_m: np.ndarray
    blur_m: np.ndarray
    blur_px: np.ndarray

    def __post_init__(self):
        if not np.all(np.diff(self.depth_m) > 0):
            raise ValueError("curve depths must be strictly increasing")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["depth_m", "blur_m", "blur_px"])
            for d, bm, bp in zip(self.depth_m, self.blur_m, self.blur_px):
                writer.writerow([repr(float(d)), repr(float(bm)), repr(float(bp))])


def blur_curve(config: CameraConfig, d_lo: float, d_hi: float, n: int) -> BlurCurve:
    """Sample the blur-vs-depth curve on [d_lo, d_hi] with n points.

    Samples are uniform in inverse depth, where blur is piecewise linear, so
    straight segments between samples reproduce the curve exactly.  When the
    focus distance lies strictly inside the range (and n >= 3), the nearest
    interior sample is snapped onto it so the curve touches zero exactly.
    """
    if not (0 < d_lo < d_hi):
        raise ValueError(f"need 0 < d_lo < d_hi, got ({d_lo}, {d_hi})")
    if n < 2:
        raise ValueError(f"need n >= 2 samples, got {n}")
    inv = np.linspace(1.0 / d_lo, 1.0 / d_hi, n)
    if n >= 3 and d_lo < config.focus_distance < d_hi:
        interior = slice(1, n - 1)
        idx = 1 + int(np.argmin(np.abs(inv[interior] - 1.0 / config.focus_distance)))
        inv[idx] = 1.0 / config.focus_distance
    depths = np.sort(1.0 / inv)
    blur_m = blur_diameter(config, depths)
    return BlurCurve(depth_m=depths, blur_m=blur_m, blur_px=blur_m / config.pixel_pitch)
