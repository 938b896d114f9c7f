"""Aggregate repeated stochastic depth predictions into mean and variance maps.

Sampling (e.g. test-time dropout in a network) happens elsewhere; this
module only reduces a stack of equally-shaped prediction maps.  Variance is
the population variance (divide by the sample count, no Bessel correction),
so a single-sample stack has zero variance everywhere; the convention is
recorded in the metadata emitted alongside the maps.
"""

from __future__ import annotations

import numpy as np

__all__ = ["aggregate", "mean_error", "VARIANCE_CONVENTION"]

VARIANCE_CONVENTION = "population"  # divide by K


def aggregate(stack) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel mean and population variance of K >= 1 depth maps.

    `stack` is a (K, H, W) array or a sequence of (H, W) maps of identical
    shape; all values must be finite.
    """
    if isinstance(stack, np.ndarray):
        arr = np.asarray(stack, dtype=np.float64)
    else:
        arr = np.stack([np.asarray(s, dtype=np.float64) for s in stack])
    if arr.ndim != 3 or arr.shape[0] < 1:
        raise ValueError(f"need a (K, H, W) stack with K >= 1, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("sample stack contains non-finite values")
    return arr.mean(axis=0), arr.var(axis=0)


def mean_error(mean: np.ndarray, gt: np.ndarray, valid: np.ndarray | None = None) -> np.ndarray:
    """Absolute error |mean - gt| on valid pixels, zero elsewhere."""
    mean = np.asarray(mean, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if mean.shape != gt.shape:
        raise ValueError(f"mean {mean.shape} and gt {gt.shape} shapes differ")
    err = np.abs(mean - gt)
    if valid is not None:
        valid = np.asarray(valid, dtype=bool)
        if valid.shape != gt.shape:
            raise ValueError("valid mask shape differs")
        err = np.where(valid, err, 0.0)
    return err
