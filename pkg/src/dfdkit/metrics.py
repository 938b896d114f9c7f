"""Depth-map error metrics and per-depth-bin statistics.

The seven-number row reported by monocular depth papers: mean relative
error, mean absolute log10 error, RMS, RMS of natural-log ratios, and the
three threshold accuracies delta < 1.25^i.  Thresholds are strict (<) and
predictions are floored at 1 mm before log metrics; both conventions are
echoed into report metadata since the community leaves them implicit.
Invalid ground truth (zero or non-finite) is excluded, never filled.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

__all__ = ["MetricsReport", "DepthBinStats", "metrics", "per_depth_rms", "depth_histogram"]

LOG_CLAMP_M = 1e-3

CSV_COLUMNS = ["rel", "log10", "rms", "rmslog", "d1", "d2", "d3"]


@dataclass(frozen=True)
class MetricsReport:
    rel: float
    log10: float
    rms: float
    rmslog: float
    delta1: float
    delta2: float
    delta3: float
    n_pixels: int

    def to_dict(self) -> dict:
        return {
            "rel": self.rel,
            "log10": self.log10,
            "rms": self.rms,
            "rmslog": self.rmslog,
            "delta1": self.delta1,
            "delta2": self.delta2,
            "delta3": self.delta3,
            "n_pixels": self.n_pixels,
            "metadata": {"delta_inequality": "strict", "log_clamp_m": LOG_CLAMP_M},
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def csv_row(self) -> list[float]:
        return [self.rel, self.log10, self.rms, self.rmslog, self.delta1, self.delta2, self.delta3]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            writer.writerow([repr(v) for v in self.csv_row()])


@dataclass(frozen=True)
class DepthBinStats:
    """Per-depth-bin pixel counts and (optionally) RMS error."""

    bin_edges: np.ndarray
    counts: np.ndarray
    rms: np.ndarray | None  # NaN marks empty bins; None for count-only stats

    def to_dict(self) -> dict:
        d = {
            "bin_edges_m": [float(e) for e in self.bin_edges],
            "counts": [int(c) for c in self.counts],
        }
        if self.rms is not None:
            d["rms"] = [None if not np.isfinite(v) else float(v) for v in self.rms]
        return d


def _valid_mask(pred, gt, valid):
    m = np.isfinite(pred) & np.isfinite(gt) & (gt > 0)
    if valid is not None:
        m &= np.asarray(valid, dtype=bool)
    return m


def metrics(pred: np.ndarray, gt: np.ndarray, valid: np.ndarray | None = None) -> MetricsReport:
    """Compute the full metric suite over valid pixels.

    Validity is the AND of the supplied mask (if any), finite pred/gt, and
    gt > 0.  rel, rms and the deltas use raw predictions; log metrics use
    predictions floored at LOG_CLAMP_M.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"pred {pred.shape} and gt {gt.shape} shapes differ")
    m = _valid_mask(pred, gt, valid)
    if not m.any():
        raise ValueError("no valid pixels to evaluate")
    p, g = pred[m], gt[m]
    p_log = np.maximum(p, LOG_CLAMP_M)
    with np.errstate(divide="ignore"):  # nonpositive pred reads as ratio inf
        ratio = np.where(p > 0, np.maximum(p / g, g / p), np.inf)
    return MetricsReport(
        rel=float(np.mean(np.abs(p - g) / g)),
        log10=float(np.mean(np.abs(np.log10(p_log) - np.log10(g)))),
        rms=float(np.sqrt(np.mean((p - g) ** 2))),
        rmslog=float(np.sqrt(np.mean((np.log(p_log) - np.log(g)) ** 2))),
        delta1=float(np.mean(ratio < 1.25)),
        delta2=float(np.mean(ratio < 1.25**2)),
        delta3=float(np.mean(ratio < 1.25**3)),
        n_pixels=int(m.sum()),
    )


def _bin_index(g: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """np.histogram bin membership: [e_i, e_i+1) with the last bin closed."""
    idx = np.searchsorted(edges, g, side="right") - 1
    idx[g == edges[-1]] = len(edges) - 2
    return idx


def per_depth_rms(
    pred: np.ndarray,
    gt: np.ndarray,
    valid: np.ndarray | None = None,
    bin_edges=None,
) -> DepthBinStats:
    """RMS error of pixels binned by their ground-truth depth.

    Default edges: 20 uniform bins over [0, 10] m.  Pixels outside the edge
    range are ignored.  Empty bins report count 0 and NaN RMS.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError("pred and gt shapes differ")
    edges = np.asarray(bin_edges if bin_edges is not None else np.linspace(0.0, 10.0, 21), dtype=np.float64)
    if edges.ndim != 1 or len(edges) < 2 or not np.all(np.diff(edges) > 0):
        raise ValueError("bin edges must be a strictly increasing 1D sequence")
    m = _valid_mask(pred, gt, valid)
    p, g = pred[m], gt[m]
    inside = (g >= edges[0]) & (g <= edges[-1])
    p, g = p[inside], g[inside]
    nbins = len(edges) - 1
    idx = _bin_index(g, edges)
    counts = np.bincount(idx, minlength=nbins)
    sq = np.bincount(idx, weights=(p - g) ** 2, minlength=nbins)
    rms = np.full(nbins, np.nan)
    nonzero = counts > 0
    rms[nonzero] = np.sqrt(sq[nonzero] / counts[nonzero])
    return DepthBinStats(bin_edges=edges, counts=counts, rms=rms)


def depth_histogram(gt: np.ndarray, valid: np.ndarray | None = None, bin_edges=None) -> DepthBinStats:
    """Pixel counts of valid ground-truth depths per bin (no error stats)."""
    gt = np.asarray(gt, dtype=np.float64)
    edges = np.asarray(bin_edges if bin_edges is not None else np.linspace(0.0, 10.0, 21), dtype=np.float64)
    if edges.ndim != 1 or len(edges) < 2 or not np.all(np.diff(edges) > 0):
        raise ValueError("bin edges must be a strictly increasing 1D sequence")
    m = np.isfinite(gt) & (gt > 0)
    if valid is not None:
        m &= np.asarray(valid, dtype=bool)
    counts, _ = np.histogram(gt[m], bins=edges)
    return DepthBinStats(bin_edges=edges, counts=counts, rms=None)
