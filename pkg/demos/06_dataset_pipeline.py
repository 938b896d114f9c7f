"""
RGB-D dataset plumbing: encodings, hole filling, resampling, augmentation
=========================================================================

The unglamorous half of any depth pipeline.  Depth maps travel as 16-bit
millimeter PNGs (lossless to 1 mm, zero = invalid) or float32 PFMs;
sensor dropouts get filled by diffusion from valid neighbors; rasters are
cropped/resampled to a common field of view (bilinear for color, nearest
for depth so object boundaries never average); and training crops + flips
hit RGB and depth identically so the pair stays registered.
"""

from pathlib import Path

import numpy as np

from dfdkit import dataset as dset

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

rng = np.random.default_rng(0)

# --- encodings ------------------------------------------------------------
depth = rng.uniform(0.5, 9.5, (480, 640))
depth = np.rint(depth * 1000) / 1000  # snap to the mm grid
dset.save_depth_png16(OUT / "depth_mm.png", depth)
back, valid = dset.load_depth(OUT / "depth_mm.png")
print(f"png16mm round trip lossless: {np.array_equal(back, depth)}")

dset.write_pfm(OUT / "depth_f32.pfm", depth.astype(np.float32))
print(f"pfm round trip exact: {np.array_equal(dset.read_pfm(OUT / 'depth_f32.pfm'), depth.astype(np.float32))}")

# --- hole filling -----------------------------------------------------------
holes = rng.random((480, 640)) < 0.15
holes[200:260, 300:420] = True  # a big sensor dropout
sparse = np.where(holes, 0.0, depth)
filled = dset.fill_invalid(sparse, sparse > 0)
print(f"filled {int(holes.sum())} invalid pixels; valid pixels untouched: "
      f"{np.array_equal(filled[~holes], depth[~holes])}")

# --- field-of-view resampling ----------------------------------------------
# center-crop 640x480 to the aligned 561x427 working geometry
x0, y0 = (640 - 561) // 2, (480 - 427) // 2
cropped = dset.resample_to_fov(filled, 561, 427, (x0, y0, 561, 427), kind="depth")
print(f"center crop -> {cropped.shape[1]}x{cropped.shape[0]}")

# downsample a DSLR-sized frame to 645x432 (one column trimmed keeps 6:1)
big = np.tile(np.linspace(0.0, 1.0, 3872), (2592, 1))
small = dset.resample_to_fov(big, 645, 432, (1, 0, 3870, 2592), kind="rgb")
print(f"DSLR downsample -> {small.shape[1]}x{small.shape[0]}")

# --- paired augmentation -----------------------------------------------------
rgb = np.stack([filled, filled * 0.5, filled * 0.25], axis=-1) / 10.0
crop_rgb, crop_depth = dset.augment(rgb, filled, seed=2024)
print(f"augment -> {crop_rgb.shape[1]}x{crop_rgb.shape[0]} crop, "
      f"registration preserved: {np.array_equal(crop_rgb[:, :, 0], crop_depth / 10.0)}")

# manifest describing the pair, paths relative to this output directory
dset.save_rgb(OUT / "pair_rgb.png", rgb)
dset.save_depth_png16(OUT / "pair_depth.png", filled)
dset.write_manifest(
    OUT / "manifest.csv",
    [dset.ManifestEntry(Path("pair_rgb.png"), Path("pair_depth.png"), "train")],
)
entries = dset.read_manifest(OUT / "manifest.csv")
print(f"manifest round trip: {len(entries)} entry, split={entries[0].split}")
