"""Smooth ridge-orientation fields with elliptical foreground masks.

Angles follow the image-axis convention used throughout the package: theta
is the direction of the ridge tangent measured from the +column axis towards
the +row axis, i.e. the unit tangent is (d_col, d_row) = (cos t, sin t).
"""
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from ..losses import orientation_decode
from ..tensor import rng

# Gaussian smoothing of the random doubled-angle components, as a fraction of min(h, w).
SMOOTHING = 0.2


@dataclass
class OrientationField:
    theta: np.ndarray  # (h, w) in [0, pi)
    mask: np.ndarray  # (h, w) uint8 {0, 1}

    @property
    def shape(self):
        return self.theta.shape


def elliptical_mask(h: int, w: int, gen: np.random.Generator) -> np.ndarray:
    cy = (h - 1) / 2 + gen.uniform(-0.03, 0.03) * h
    cx = (w - 1) / 2 + gen.uniform(-0.03, 0.03) * w
    ry = gen.uniform(0.40, 0.46) * h
    rx = gen.uniform(0.36, 0.44) * w
    yy, xx = np.mgrid[0:h, 0:w]
    return ((((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2) <= 1.0).astype(np.uint8)


def gen_orientation_field(seed: int, h: int, w: int) -> OrientationField:
    if h < 32 or w < 32:
        raise ValueError(f"orientation fields need h, w >= 32, got {h}x{w}")
    gen = rng(seed)
    sigma = SMOOTHING * min(h, w)
    comps = gen.standard_normal((2, h, w))
    # a random mean direction keeps the smoothed vector field away from zero
    base = gen.uniform(0, np.pi)
    comps *= sigma  # compensate the variance loss of smoothing
    s = gaussian_filter(comps[0], sigma, mode="reflect") + 0.6 * np.sin(2 * base)
    c = gaussian_filter(comps[1], sigma, mode="reflect") + 0.6 * np.cos(2 * base)
    theta = orientation_decode(np.stack([s, c]))
    return OrientationField(theta, elliptical_mask(h, w, gen))
