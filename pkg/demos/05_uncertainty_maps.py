"""
Aggregating repeated depth predictions into mean and variance maps
==================================================================

Stochastic predictors (e.g. dropout at test time) yield a different depth
map per forward pass; the per-pixel mean is the final prediction and the
per-pixel population variance is a map of model ignorance.  This script
fakes such a sampler - a ground-truth scene plus noise that is larger
near depth edges, where real networks hesitate - aggregates 50 samples,
and writes mean / variance / mean-error maps (PFM for exact floats, PNG
previews for a quick look).
"""

from pathlib import Path

import numpy as np

from dfdkit import dataset as dset
from dfdkit.uncertainty import aggregate, mean_error

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

rng = np.random.default_rng(11)
H, W = 160, 200

gt = np.full((H, W), 3.0)
gt[40:110, 50:130] = 1.4
gt[90:150, 140:190] = 2.2

# noise floor everywhere, tripled within 4 px of a depth discontinuity
edge = np.zeros((H, W), dtype=bool)
edge[:, 1:] |= np.abs(np.diff(gt, axis=1)) > 0
edge[1:, :] |= np.abs(np.diff(gt, axis=0)) > 0
from scipy.ndimage import binary_dilation

near_edge = binary_dilation(edge, iterations=4)
sigma = np.where(near_edge, 0.30, 0.10)

stack = gt[None] + rng.normal(0.0, 1.0, (50, H, W)) * sigma[None]

mean, variance = aggregate(stack)
err = mean_error(mean, gt)

print(f"mean abs deviation of the mean map: {np.abs(mean - gt).mean():.4f} m")
print(f"variance: edge region {variance[near_edge].mean():.4f}, "
      f"flat region {variance[~near_edge].mean():.4f} (expect ~9x ratio)")

dset.write_pfm(OUT / "mean.pfm", mean)
dset.write_pfm(OUT / "variance.pfm", variance)
dset.write_pfm(OUT / "mean_error.pfm", err)
# quick-look PNGs, normalized to their own range
for name, arr in [("mean", mean), ("variance", variance), ("mean_error", err)]:
    lo, hi = arr.min(), arr.max()
    dset.save_rgb(OUT / f"unc_{name}.png", (arr - lo) / (hi - lo if hi > lo else 1.0))
print(f"wrote mean/variance/mean_error PFMs and PNG previews in {OUT}")
