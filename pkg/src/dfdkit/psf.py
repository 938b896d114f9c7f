"""Normalized blur kernels and replicate-border convolution.

Disk kernels model the geometric defocus spot; Gaussian kernels serve the
re-blur step of edge-based blur estimation.  Kernels always have odd side
length, non-negative taps summing to one, and 4-fold (flip) symmetry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage, signal

__all__ = ["Kernel", "disk_kernel", "gaussian_kernel", "convolve"]

# Direct spatial convolution below this kernel side, padded FFT above.
_FFT_SIDE_THRESHOLD = 15


@dataclass(frozen=True)
class Kernel:
    """2D point-spread function: odd-sided tap array summing to 1."""

    taps: np.ndarray
    radius_px: int
    kind: str  # disk | gaussian | delta

    def __post_init__(self):
        side = self.taps.shape[0]
        if self.taps.ndim != 2 or self.taps.shape[1] != side or side % 2 == 0:
            raise ValueError(f"kernel taps must be square with odd side, got {self.taps.shape}")
        if side != 2 * self.radius_px + 1:
            raise ValueError("radius_px inconsistent with tap array size")

    @property
    def side(self) -> int:
        return self.taps.shape[0]


def _delta_kernel() -> Kernel:
    return Kernel(taps=np.array([[1.0]]), radius_px=0, kind="delta")


def disk_kernel(diameter_px: float, subsamples: int = 8) -> Kernel:
    """Uniform disk of the given diameter in pixels, area-antialiased.

    Each tap's weight is the fraction of its unit pixel square covered by
    the disk, estimated on a subsamples x subsamples grid (8x8 by default),
    then the whole kernel is renormalized.  Diameters below one pixel are
    unobservable at sensor resolution and collapse to a delta kernel.
    """
    if diameter_px < 0:
        raise ValueError(f"diameter_px must be >= 0, got {diameter_px}")
    if diameter_px < 1.0:
        return _delta_kernel()
    radius = diameter_px / 2.0
    # Outermost tap whose pixel square can intersect the disk.
    r_taps = int(np.ceil(radius - 0.5))
    side = 2 * r_taps + 1
    # Subpixel sample offsets within one pixel, centered on the tap.
    sub = (np.arange(subsamples) + 0.5) / subsamples - 0.5
    centers = np.arange(-r_taps, r_taps + 1, dtype=float)
    x = centers[:, None] + sub[None, :]  # (side, subsamples)
    x2 = (x**2).reshape(side, 1, subsamples, 1)
    y2 = (x**2).reshape(1, side, 1, subsamples)
    inside = (x2 + y2) <= radius**2
    taps = inside.sum(axis=(2, 3)).astype(float)
    total = taps.sum()
    if total == 0:  # diameter >= 1 always covers the center sample; defensive
        return _delta_kernel()
    return Kernel(taps=taps / total, radius_px=r_taps, kind="disk")


def gaussian_kernel(sigma_px: float) -> Kernel:
    """Isotropic Gaussian kernel truncated near 4 sigma and renormalized."""
    if sigma_px <= 0:
        raise ValueError(f"sigma_px must be > 0, got {sigma_px}")
    radius = max(1, int(round(4.0 * sigma_px)))
    ax = np.arange(-radius, radius + 1, dtype=float)
    taps = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * sigma_px**2))
    return Kernel(taps=taps / taps.sum(), radius_px=radius, kind="gaussian")


def _convolve_plane(plane: np.ndarray, taps: np.ndarray) -> np.ndarray:
    if taps.shape[0] <= _FFT_SIDE_THRESHOLD:
        return ndimage.convolve(plane, taps, mode="nearest")
    r = taps.shape[0] // 2
    padded = np.pad(plane, r, mode="edge")
    return signal.fftconvolve(padded, taps, mode="same")[r:-r, r:-r]


def convolve(img: np.ndarray, kernel: Kernel) -> np.ndarray:
    """Convolve an image with a kernel under edge-replication.

    Matches a direct dense convolution with replicated borders; a padded FFT
    path is used for large kernels (identical to within 1e-6).  Works on
    (H, W) or (H, W, C) float arrays and preserves shape.  Delta kernels
    return an exact copy.
    """
    img = np.asarray(img, dtype=float)
    h, w = img.shape[:2]
    if kernel.side > 2 * min(h, w):
        raise ValueError(
            f"kernel side {kernel.side} too large for {w}x{h} image "
            f"(limit {2 * min(h, w)})"
        )
    if kernel.kind == "delta" or kernel.side == 1:
        return img.copy()
    if img.ndim == 2:
        return _convolve_plane(img, kernel.taps)
    out = np.empty_like(img)
    for c in range(img.shape[2]):
        out[:, :, c] = _convolve_plane(img[:, :, c], kernel.taps)
    return out
