"""Layered, occlusion-aware defocus rendering of all-in-focus RGB-D pairs.

A depth map is quantized into layers of near-constant blur (bucketed on
*signed* blur so equal blur in front of and behind the focus plane never
merges).  Each layer is extended behind its occluders by diffusion
inpainting, blurred with its disk kernel, and the stack is composited
back-to-front with cumulative occlusion weights

    M_k = prod_{k' > k} (1 - A_k' * h_k'),

where A_k' are the binary layer masks and h_k' their kernels.  The output
is the sum of blurred layers weighted by M_k, clamped to [0, 1].
Rendering happens in the stored (gamma-encoded) intensity of the input.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

import dfdkit
from dfdkit import dataset as dset
from dfdkit._fill import diffusion_fill, nearest_valid_fill
from dfdkit.optics import CameraConfig, blur_diameter_px, signed_blur_px
from dfdkit.psf import Kernel, convolve, disk_kernel

__all__ = [
    "Layer",
    "DepthLayering",
    "quantize_depth",
    "extend_layer",
    "cumulative_occlusion",
    "render_defocus",
    "render_dataset",
]

DEFAULT_STEP_PX = 0.25


@dataclass(frozen=True)
class Layer:
    mask: np.ndarray            # binary membership, (H, W) bool
    representative_depth: float  # meters, centroid of member pixels
    blur_px: float               # unsigned blur diameter at the representative depth
    signed_blur_px: float        # negative in front of focus, positive behind


@dataclass(frozen=True)
class DepthLayering:
    """Back-to-front (farthest first) disjoint layers covering every pixel."""

    layers: list[Layer]
    quantization_step: float

    def __len__(self) -> int:
        return len(self.layers)


def quantize_depth(depth: np.ndarray, config: CameraConfig, step_px: float = DEFAULT_STEP_PX) -> DepthLayering:
    """Bucket a filled depth map into layers of width `step_px` in signed blur.

    Buckets are [k, k+1) * step_px in signed blur, so zero is a bucket edge
    and depths on opposite sides of the focus plane always land in distinct
    layers.  Each layer's representative depth is the mean depth of its
    member pixels; its blur is the blur at that depth.  Layers are ordered
    back to front (decreasing depth) so occluders come later.
    """
    depth = np.asarray(depth, dtype=np.float64)
    if depth.ndim != 2:
        raise ValueError("depth must be a 2D raster")
    if step_px <= 0:
        raise ValueError(f"step_px must be > 0, got {step_px}")
    if not np.isfinite(depth).all() or (depth <= 0).any():
        raise ValueError("depth map contains invalid values; fill it first")
    signed = signed_blur_px(config, depth)
    bins = np.floor(signed / step_px).astype(np.int64)
    layers = []
    for b in sorted(np.unique(bins), reverse=True):  # large signed blur = far = back
        mask = bins == b
        rep = float(depth[mask].mean())
        layers.append(
            Layer(
                mask=mask,
                representative_depth=rep,
                blur_px=float(blur_diameter_px(config, rep)),
                signed_blur_px=float(signed_blur_px(config, rep)),
            )
        )
    return DepthLayering(layers=layers, quantization_step=float(step_px))


def extend_layer(img: np.ndarray, mask: np.ndarray, halo_px) -> np.ndarray:
    """Continue a masked layer into a halo around it; zero beyond.

    Values inside the mask are kept.  Pixels within `halo_px` (Euclidean)
    of the mask are filled by isotropic diffusion seeded from the mask
    (nearest-value start, relaxed until the largest update is < 1e-4 or 500
    sweeps).  `halo_px` may be math.inf to extend over the whole frame.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("cannot extend an empty layer mask")
    img = np.asarray(img, dtype=np.float64)
    out = np.zeros_like(img)
    out[mask] = img[mask]
    if math.isinf(halo_px):
        halo = ~mask
    elif halo_px <= 0:
        return out
    else:
        dist = ndimage.distance_transform_edt(~mask)
        halo = (dist <= halo_px) & ~mask
    if not halo.any():
        return out
    return diffusion_fill(out, known=mask, region=halo)


def _extend_full_frame(img: np.ndarray, mask: np.ndarray, band_px: float) -> np.ndarray:
    """Back-most layer continuation over the whole frame.

    Nearest-value fill everywhere (so coverage spans the frame), with the
    diffusion relaxation spent only within `band_px` of the mask: farther
    pixels sit deeper than one kernel radius inside some occluder, where
    the cumulative occlusion weight vanishes and their value cannot reach
    the composite.
    """
    img = np.asarray(img, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if mask.all():
        return img.copy()
    filled = nearest_valid_fill(img, mask)
    band = (ndimage.distance_transform_edt(~mask) <= band_px) & ~mask
    if not band.any():
        return filled
    return diffusion_fill(filled, known=mask, region=band)


def cumulative_occlusion(layering: DepthLayering, kernels: list[Kernel]) -> list[np.ndarray]:
    """Per-layer occlusion weights M_k = prod over nearer layers of (1 - A*h).

    The front-most layer gets all ones.  Results are clamped to [0, 1]
    after floating error.
    """
    if len(kernels) != len(layering.layers):
        raise ValueError("need exactly one kernel per layer")
    n = len(kernels)
    shape = layering.layers[0].mask.shape
    weights = [np.ones(shape)]
    running = np.ones(shape)
    for k in range(n - 1, 0, -1):  # walk from front toward back
        blurred = convolve(layering.layers[k].mask.astype(np.float64), kernels[k])
        running = running * (1.0 - blurred)
        weights.append(np.clip(running, 0.0, 1.0))
    weights.reverse()
    return weights


def render_defocus(
    rgb: np.ndarray,
    depth: np.ndarray,
    config: CameraConfig,
    step_px: float = DEFAULT_STEP_PX,
) -> np.ndarray:
    """Render a defocused image from an all-in-focus RGB(-or-gray)/depth pair.

    Layers are blurred with disk kernels sized from their representative
    blur.  Each layer is inpaint-extended behind its occluders by its own
    kernel radius (the back-most layer over the whole frame) so blur can
    reach across occlusion boundaries, then composited with cumulative
    occlusion weights.  Output is clamped to [0, 1].
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    if rgb.shape[:2] != depth.shape:
        raise ValueError(f"rgb {rgb.shape[:2]} and depth {depth.shape} dimensions differ")
    layering = quantize_depth(depth, config, step_px)
    kernels = [disk_kernel(layer.blur_px) for layer in layering.layers]
    occlusion = cumulative_occlusion(layering, kernels)

    n = len(layering.layers)
    # Pixels hidden by strictly nearer layers; extensions may only live there.
    occluded = np.zeros(depth.shape, dtype=bool)
    occluded_by_nearer = [None] * n
    for k in range(n - 1, -1, -1):
        occluded_by_nearer[k] = occluded.copy()
        occluded = occluded | layering.layers[k].mask

    rmax = max(k.radius_px for k in kernels)
    out = np.zeros_like(rgb)
    for k, (layer, kernel) in enumerate(zip(layering.layers, kernels)):
        if k == 0:
            extended = _extend_full_frame(rgb, layer.mask, kernel.radius_px + rmax + 2)
        else:
            extended = extend_layer(rgb, layer.mask, float(kernel.radius_px))
            allowed = layer.mask | occluded_by_nearer[k]
            extended = extended * (allowed[..., None] if rgb.ndim == 3 else allowed)
        term = convolve(extended, kernel)
        m = occlusion[k]
        out += term * (m[..., None] if rgb.ndim == 3 else m)
    return np.clip(out, 0.0, 1.0)


def render_dataset(
    manifest,
    config: CameraConfig,
    out_dir,
    step_px: float = DEFAULT_STEP_PX,
) -> dict:
    """Render every manifest entry to `<basename>_defocus.png` in out_dir.

    `manifest` is a manifest CSV path or a list of ManifestEntry.  Invalid
    depth pixels are filled before rendering.  Per-entry failures are
    recorded in the returned report and processing continues.  A
    render_config.json sidecar captures all parameters; outputs are fully
    deterministic for fixed (manifest, config, step_px).
    """
    entries = dset.read_manifest(manifest) if not isinstance(manifest, list) else manifest
    if not entries:
        raise ValueError("manifest is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    sidecar = {
        **config.to_dict(),
        "quantization_px": float(step_px),
        "intensity_encoding": "stored",  # blur applied to pixel values as stored, no de-gamma
        "tool_version": dfdkit.__version__,
    }
    with open(out_dir / "render_config.json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")

    results = []
    for entry in entries:
        name = Path(entry.rgb_path).stem
        out_name = f"{name}_defocus.png"
        try:
            rgb = dset.load_rgb(entry.rgb_path)
            depth, valid = dset.load_depth(entry.depth_path)
            if not valid.all():
                depth = dset.fill_invalid(depth, valid)
            rendered = render_defocus(rgb, depth, config, step_px)
            dset.save_rgb(out_dir / out_name, rendered)
            results.append({"entry": name, "output": out_name, "status": "ok"})
        except (OSError, ValueError) as exc:
            results.append({"entry": name, "status": "error", "message": str(exc)})
    n_ok = sum(1 for r in results if r["status"] == "ok")
    return {
        "n_entries": len(results),
        "n_ok": n_ok,
        "n_failed": len(results) - n_ok,
        "entries": results,
    }
