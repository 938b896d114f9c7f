"""Shared nearest-value plus diffusion fill used by layer extension and hole filling."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

_SHIFTS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def nearest_valid_fill(values: np.ndarray, known: np.ndarray) -> np.ndarray:
    """Copy each unknown pixel from its nearest known pixel (Euclidean)."""
    if not known.any():
        raise ValueError("cannot fill: no known pixels")
    _, (iy, ix) = ndimage.distance_transform_edt(~known, return_indices=True)
    return values[iy, ix]


def diffusion_fill(
    values: np.ndarray,
    known: np.ndarray,
    region: np.ndarray,
    tol: float = 1e-4,
    max_iters: int = 500,
) -> np.ndarray:
    """Fill `region` by isotropic diffusion from `known` pixels.

    Synchronous (Jacobi) updates: each region pixel moves to the plain mean
    of its 4-neighbors lying in known|region; pixels outside both sets are
    ignored, so nothing leaks in from beyond the fill area.  Known pixels
    stay fixed.  Region pixels start from their nearest known value, which
    makes piecewise-constant inputs an immediate fixed point.  Stops when
    the largest update drops below `tol` or after `max_iters` sweeps.

    Returns a copy of `values` with `region` replaced; all other pixels are
    passed through unchanged.
    """
    if not known.any():
        raise ValueError("cannot fill: no known pixels")
    out = np.array(values, dtype=np.float64, copy=True)
    if not region.any():
        return out
    filled = nearest_valid_fill(out, known)
    out[region] = filled[region]

    # Gather-based sweeps touch only region pixels, not the whole frame.
    h, w = region.shape
    domain_flat = (known | region).ravel()
    ridx = np.flatnonzero(region)
    ry, rx = np.unravel_index(ridx, (h, w))
    neighbors, in_domain = [], []
    for dy, dx in _SHIFTS:
        ny, nx = ry + dy, rx + dx
        inside = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
        flat = np.clip(ny, 0, h - 1) * w + np.clip(nx, 0, w - 1)
        neighbors.append(flat)
        in_domain.append(inside & domain_flat[flat])
    neighbors = np.stack(neighbors)            # (4, N)
    weight = np.stack(in_domain).astype(float)  # (4, N)
    count = weight.sum(axis=0)
    updatable = count > 0

    flat_vals = out.reshape(h * w, -1)  # view; trailing channel axis of size C or 1
    nb = neighbors[:, updatable]
    wgt = weight[:, updatable][..., None]
    tgt = ridx[updatable]
    cnt = count[updatable][:, None]
    for _ in range(max_iters):
        mean = (flat_vals[nb] * wgt).sum(axis=0) / cnt
        delta = np.abs(mean - flat_vals[tgt]).max() if tgt.size else 0.0
        flat_vals[tgt] = mean
        if delta < tol:
            break
    return out
