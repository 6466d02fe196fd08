"""Severity-parameterised degradation: noise, blur, contrast, scratches, blobs.

Every random draw is made unconditionally and in a fixed order from the
seed, and severity only scales magnitudes or truncates candidate lists, so a
higher severity with the same seed is a superset of the lower one's damage.
"""
from dataclasses import dataclass
from typing import List

import numpy as np
from scipy.ndimage import uniform_filter

from ..tensor import rng

MAX_SCRATCHES = 6
MAX_BLOBS = 4


@dataclass
class DegradeConfig:
    severity: float
    gaussian_noise_sigma: float
    blur_radius: int
    contrast_gamma: float  # exponent; 1.0 is neutral
    scratch_count: int
    blob_count: int
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.severity <= 1.0:
            raise ValueError(f"severity must be in [0, 1], got {self.severity}")
        if self.severity == 0 and (self.gaussian_noise_sigma or self.blur_radius or self.contrast_gamma != 1.0
                                   or self.scratch_count or self.blob_count):
            raise ValueError("severity 0 requires every effect magnitude to be 0")

    @classmethod
    def from_severity(cls, severity: float, seed: int) -> "DegradeConfig":
        s = float(severity)
        g = rng([seed, 1])
        gamma_dir = g.choice([-1.0, 1.0])
        return cls(
            severity=s,
            gaussian_noise_sigma=0.15 * s,
            blur_radius=int(np.floor(2 * s + 0.5)),
            contrast_gamma=float(np.exp(gamma_dir * 0.6 * s)),
            scratch_count=int(round(MAX_SCRATCHES * s)),
            blob_count=int(round(MAX_BLOBS * s)),
            seed=seed,
        )

    def applied(self) -> List[str]:
        kinds = []
        if self.gaussian_noise_sigma > 0:
            kinds.append("gaussian_noise")
        if self.blur_radius > 0:
            kinds.append("box_blur")
        if self.contrast_gamma != 1.0:
            kinds.append("gamma_contrast")
        if self.scratch_count > 0:
            kinds.append("scratches")
        if self.blob_count > 0:
            kinds.append("blobs")
        return kinds


def _draw_segment(img, r0, c0, r1, c1, width, value):
    h, w = img.shape
    n = int(np.ceil(np.hypot(r1 - r0, c1 - c0))) * 2 + 1
    rr = np.linspace(r0, r1, n)
    cc = np.linspace(c0, c1, n)
    for dr in range(-(width // 2), width - width // 2):
        r = np.clip(np.rint(rr + dr).astype(int), 0, h - 1)
        c = np.clip(np.rint(cc).astype(int), 0, w - 1)
        img[r, c] = value


def degrade(clean, cfg: DegradeConfig) -> np.ndarray:
    """Degraded copy of ``clean`` in [0, 1]; ``clean`` itself is never modified."""
    img = np.array(clean, dtype=np.float64, copy=True)
    if cfg.severity == 0:
        return img
    h, w = img.shape
    g = rng([cfg.seed, 0])
    noise = g.standard_normal((h, w))
    scratches = [(g.uniform(0, h), g.uniform(0, w), g.uniform(0, h), g.uniform(0, w), int(g.integers(1, 3)))
                 for _ in range(MAX_SCRATCHES)]
    blobs = [(g.uniform(0, h), g.uniform(0, w), g.uniform(3, 8), g.uniform(3, 8), g.uniform(0.55, 0.95))
             for _ in range(MAX_BLOBS)]

    img = img + cfg.gaussian_noise_sigma * noise
    if cfg.blur_radius > 0:
        img = uniform_filter(img, size=2 * cfg.blur_radius + 1, mode="reflect")
    img = np.clip(img, 0.0, 1.0) ** cfg.contrast_gamma
    for r0, c0, r1, c1, width in scratches[:cfg.scratch_count]:
        _draw_segment(img, r0, c0, r1, c1, width, 1.0)
    yy, xx = np.indices((h, w))
    for cy, cx, ry, rx, value in blobs[:cfg.blob_count]:
        img[((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0] = value
    return np.clip(img, 0.0, 1.0)
