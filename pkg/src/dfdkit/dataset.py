"""RGB-D ingestion, depth encodings, hole filling, resampling, augmentation.

Depth travels in two interchange formats:

* ``png16mm`` -- 16-bit grayscale PNG holding millimeters (Kinect-style),
  covering [0, 65.535] m losslessly at 1 mm steps; 0 marks invalid.
* ``pfm`` -- 32-bit float meters for exact interchange; non-finite marks
  invalid.

RGB images are 8-bit PNGs scaled to [0, 1] floats on load.  Manifests are
CSV files with header ``rgb_path,depth_path,split``; relative paths resolve
against the DFDKIT_DATA_ROOT environment variable when set, else against
the manifest's own directory.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from dfdkit._fill import diffusion_fill

__all__ = [
    "ManifestEntry",
    "read_manifest",
    "write_manifest",
    "load_rgb",
    "save_rgb",
    "load_depth",
    "save_depth_png16",
    "read_pfm",
    "write_pfm",
    "fill_invalid",
    "resample_to_fov",
    "augment",
    "apply_crop_flip",
]

DATA_ROOT_ENV = "DFDKIT_DATA_ROOT"


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    rgb_path: Path
    depth_path: Path
    split: str

    def __post_init__(self):
        if self.split not in ("train", "test"):
            raise ValueError(f"split must be 'train' or 'test', got {self.split!r}")


def _resolve(path_str: str, root: Path) -> Path:
    p = Path(path_str)
    return p if p.is_absolute() else root / p


def read_manifest(path, root=None) -> list[ManifestEntry]:
    """Read a rgb_path,depth_path,split CSV; resolve relative paths.

    Resolution order for relative entries: explicit `root` argument, then
    the DFDKIT_DATA_ROOT environment variable, then the manifest directory.
    """
    path = Path(path)
    if root is None:
        env = os.environ.get(DATA_ROOT_ENV)
        root = Path(env) if env else path.parent
    root = Path(root)
    entries = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        needed = {"rgb_path", "depth_path", "split"}
        if reader.fieldnames is None or not needed.issubset(reader.fieldnames):
            raise ValueError(f"manifest {path} must have columns rgb_path,depth_path,split")
        for row in reader:
            if not row["rgb_path"] or not row["depth_path"]:
                raise ValueError(f"manifest {path} has an empty path entry")
            entries.append(
                ManifestEntry(
                    rgb_path=_resolve(row["rgb_path"], root),
                    depth_path=_resolve(row["depth_path"], root),
                    split=row["split"],
                )
            )
    return entries


def write_manifest(path, entries) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rgb_path", "depth_path", "split"])
        for e in entries:
            writer.writerow([str(e.rgb_path), str(e.depth_path), e.split])


# ---------------------------------------------------------------------------
# Image / depth IO
# ---------------------------------------------------------------------------

def load_rgb(path) -> np.ndarray:
    """Load an image as floats in [0, 1]: (H, W, 3) for color, (H, W) for gray."""
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.float64)
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise OSError(f"cannot decode image {path}: {exc}") from exc
    return arr / 255.0


def save_rgb(path, img: np.ndarray) -> None:
    """Write a [0, 1] float image as an 8-bit PNG (gray or RGB)."""
    arr = np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path)


def save_depth_png16(path, depth_m: np.ndarray) -> None:
    """Write depth in meters as a 16-bit millimeter PNG; invalid (non-finite
    or non-positive) pixels become the 0 marker."""
    d = np.asarray(depth_m, dtype=np.float64)
    mm = np.where(np.isfinite(d) & (d > 0), np.rint(d * 1000.0), 0.0)
    mm = np.clip(mm, 0, 65535).astype(np.uint16)
    Image.fromarray(mm).save(path)  # uint16 -> mode I;16


def _load_depth_png16(path) -> tuple[np.ndarray, np.ndarray]:
    with Image.open(path) as im:
        arr = np.asarray(im)
    if arr.ndim != 2:
        raise OSError(f"{path}: expected single-channel 16-bit depth PNG")
    depth = arr.astype(np.float64) / 1000.0
    return depth, arr > 0


def load_depth(path, encoding=None) -> tuple[np.ndarray, np.ndarray]:
    """Load a depth map in meters plus its validity mask.

    `encoding` is 'png16mm' or 'pfm'; by default it is inferred from the
    file extension (.pfm -> pfm, anything else -> png16mm).
    """
    path = Path(path)
    if encoding is None:
        encoding = "pfm" if path.suffix.lower() == ".pfm" else "png16mm"
    if encoding == "png16mm":
        return _load_depth_png16(path)
    if encoding == "pfm":
        depth = read_pfm(path).astype(np.float64)
        valid = np.isfinite(depth)
        return depth, valid
    raise ValueError(f"unknown depth encoding {encoding!r}")


def read_pfm(path) -> np.ndarray:
    """Read a grayscale or color PFM file (float32, bottom-up scanlines)."""
    with open(path, "rb") as fh:
        header = fh.readline().strip()
        if header == b"Pf":
            channels = 1
        elif header == b"PF":
            channels = 3
        else:
            raise OSError(f"{path}: not a PFM file (header {header!r})")
        dims = fh.readline().split()
        w, h = int(dims[0]), int(dims[1])
        scale = float(fh.readline().strip())
        endian = "<" if scale < 0 else ">"
        count = w * h * channels
        data = np.frombuffer(fh.read(count * 4), dtype=endian + "f4", count=count)
    shape = (h, w) if channels == 1 else (h, w, channels)
    return np.flipud(data.reshape(shape)).copy()


def write_pfm(path, data: np.ndarray) -> None:
    """Write a 2D float array as a little-endian grayscale PFM (exact float32)."""
    arr = np.asarray(data, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError("write_pfm expects a 2D array")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{w} {h}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(np.flipud(arr).tobytes())


# ---------------------------------------------------------------------------
# Depth preprocessing
# ---------------------------------------------------------------------------

def fill_invalid(depth: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Fill invalid depth pixels from their valid surroundings.

    Invalid pixels start at the nearest valid value and are relaxed by
    isotropic diffusion (same scheme as layer extension, unguided).  Valid
    pixels are never altered.
    """
    depth = np.asarray(depth, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    if depth.shape != valid.shape:
        raise ValueError("depth and valid mask shapes differ")
    if not valid.any():
        raise ValueError("cannot fill a depth map with no valid pixels")
    if valid.all():
        return depth.copy()
    return diffusion_fill(depth, known=valid, region=~valid)


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

def resample_to_fov(arr: np.ndarray, target_w: int, target_h: int, crop, kind: str) -> np.ndarray:
    """Crop a source-coordinate rectangle, then resample it to target size.

    `crop` is (x, y, w, h) in source pixels and must lie inside the array.
    `kind` selects the interpolation: 'rgb' uses bilinear, 'depth' uses
    nearest neighbor so no phantom intermediate depths appear at object
    boundaries.  A crop already at target size is returned as-is.
    """
    if kind not in ("rgb", "depth"):
        raise ValueError(f"kind must be 'rgb' or 'depth', got {kind!r}")
    arr = np.asarray(arr, dtype=np.float64)
    h, w = arr.shape[:2]
    cx, cy, cw, ch = (int(v) for v in crop)
    if cw <= 0 or ch <= 0 or cx < 0 or cy < 0 or cx + cw > w or cy + ch > h:
        raise ValueError(f"crop {crop} out of bounds for {w}x{h} source")
    if target_w <= 0 or target_h <= 0:
        raise ValueError("target size must be positive")
    cropped = arr[cy : cy + ch, cx : cx + cw]
    if (cw, ch) == (target_w, target_h):
        return cropped.copy()
    resample = Image.BILINEAR if kind == "rgb" else Image.NEAREST
    if cropped.ndim == 2:
        im = Image.fromarray(cropped.astype(np.float32), mode="F")
        return np.asarray(im.resize((target_w, target_h), resample), dtype=np.float64)
    planes = [
        np.asarray(
            Image.fromarray(cropped[:, :, c].astype(np.float32), mode="F").resize(
                (target_w, target_h), resample
            ),
            dtype=np.float64,
        )
        for c in range(cropped.shape[2])
    ]
    return np.stack(planes, axis=-1)


# ---------------------------------------------------------------------------
# Augmentation
# ---------------------------------------------------------------------------

def apply_crop_flip(rgb, depth, y: int, x: int, size: int, flip: bool):
    """Apply one crop window and optional horizontal flip to both rasters."""
    rgb_c = rgb[y : y + size, x : x + size]
    depth_c = depth[y : y + size, x : x + size]
    if flip:
        rgb_c = rgb_c[:, ::-1]
        depth_c = depth_c[:, ::-1]
    return np.ascontiguousarray(rgb_c), np.ascontiguousarray(depth_c)


def augment(rgb: np.ndarray, depth: np.ndarray, seed: int, crop_size: int = 224):
    """Random crop plus 50% horizontal flip, identical on both rasters.

    No photometric or scaling transforms: those would corrupt the defocus
    cue the pipeline exists to preserve.  Deterministic per seed.
    """
    h, w = depth.shape[:2]
    if rgb.shape[:2] != (h, w):
        raise ValueError("rgb and depth shapes differ")
    if h < crop_size or w < crop_size:
        raise ValueError(f"source {w}x{h} smaller than crop {crop_size}x{crop_size}")
    rng = np.random.default_rng(seed)
    y = int(rng.integers(0, h - crop_size + 1))
    x = int(rng.integers(0, w - crop_size + 1))
    flip = bool(rng.random() < 0.5)
    return apply_crop_flip(rgb, depth, y, x, crop_size, flip)
