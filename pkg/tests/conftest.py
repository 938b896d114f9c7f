"""Shared helpers: independent oracles and procedural scene builders."""

import numpy as np
import pytest

from dfdkit.optics import CameraConfig


@pytest.fixture
def cfg_2m():
    """The synthetic-camera setting used throughout: 15 mm, f/2.8, 5.6 um."""
    return CameraConfig(focal_length=0.015, f_number=2.8, pixel_pitch=5.6e-6, focus_distance=2.0)


@pytest.fixture
def cfg_8m():
    return CameraConfig(focal_length=0.015, f_number=2.8, pixel_pitch=5.6e-6, focus_distance=8.0)


def conv_naive(img, taps):
    """Quadruple-loop true convolution with replicated borders (the oracle)."""
    r = taps.shape[0] // 2
    h, w = img.shape
    out = np.zeros_like(img, dtype=float)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for i in range(-r, r + 1):
                for j in range(-r, r + 1):
                    yy = min(max(y - i, 0), h - 1)
                    xx = min(max(x - j, 0), w - 1)
                    acc += img[yy, xx] * taps[r + i, r + j]
            out[y, x] = acc
    return out


def grid_texture(h, w, cell, seed):
    """Piecewise-constant tone grid with guaranteed contrast at every boundary."""
    rng = np.random.default_rng(seed)
    ty = (h + cell - 1) // cell
    tx = (w + cell - 1) // cell
    dark = rng.uniform(0.05, 0.30, (ty, tx))
    light = rng.uniform(0.70, 0.95, (ty, tx))
    checker = (np.add.outer(np.arange(ty), np.arange(tx)) % 2).astype(bool)
    img = np.kron(np.where(checker, light, dark), np.ones((cell, cell)))[:h, :w]
    return np.stack([img, img, img], axis=-1)


def edge_spread_sigma(plane):
    """Std of a vertical edge profile's gradient; grows with blur width."""
    prof = plane.mean(axis=0)
    g = np.abs(np.diff(prof))
    x = np.arange(g.size)
    mu = (g * x).sum() / g.sum()
    return float(np.sqrt((g * (x - mu) ** 2).sum() / g.sum()))
