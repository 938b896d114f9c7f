"""Defocus-blur simulation and single-image depth-from-defocus toolkit.

Submodules
----------
optics       thin-lens blur model: blur vs depth, inversion, depth of field
psf          disk / Gaussian kernels and replicate-border convolution
render       layered, occlusion-aware defocus rendering of RGB-D pairs
sidfd        classical single-image depth-from-defocus estimation
metrics      depth-map error metrics and per-depth-bin statistics
uncertainty  mean / variance aggregation of repeated depth predictions
dataset      RGB-D loading, depth encodings, hole filling, augmentation
cli          batch command-line front end
"""

from dfdkit import dataset, metrics, optics, psf, render, sidfd, uncertainty
from dfdkit.optics import CameraConfig, blur_diameter, blur_diameter_px, blur_curve
from dfdkit.psf import disk_kernel, gaussian_kernel, convolve
from dfdkit.render import quantize_depth, render_defocus, render_dataset
from dfdkit.sidfd import estimate_depth, EstimateParams
from dfdkit.uncertainty import aggregate, mean_error

__version__ = "0.1.0"
