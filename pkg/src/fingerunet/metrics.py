"""SSIM / PSNR / RMSE on the 8-bit scale.

Inputs are images in [0, 1]; they are scaled by 255 before any statistic.
Two SSIM variants are computed: the standard 11x11 Gaussian-weighted
(sigma 1.5) sliding window over the valid region, and a simple variant that
averages SSIM over non-overlapping 8x8 blocks with uniform weights.
"""
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

C1 = (0.01 * 255) ** 2
C2 = (0.03 * 255) ** 2
PSNR_CAP = 100.0


@dataclass
class MetricsReport:
    ssim: float
    ssim_block: float
    psnr: float
    rmse: float

    def to_line(self) -> str:
        return " ".join(f"{k}={v:.6f}" for k, v in asdict(self).items())

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _prep(pred, target):
    p = np.asarray(pred, dtype=np.float64).squeeze()
    t = np.asarray(target, dtype=np.float64).squeeze()
    if p.shape != t.shape or p.ndim != 2:
        raise ValueError(f"metrics need two single-channel images of equal dims, got {p.shape} and {t.shape}")
    return p * 255.0, t * 255.0


def rmse(pred, target) -> float:
    p, t = _prep(pred, target)
    return float(np.sqrt(np.mean((p - t) ** 2)))


def psnr_from_rmse(r: float) -> float:
    if r < 255e-5:
        return PSNR_CAP
    return 20.0 * math.log10(255.0 / r)


def psnr(pred, target) -> float:
    return psnr_from_rmse(rmse(pred, target))


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2
    g = np.exp(-(ax ** 2) / (2 * sigma ** 2))
    g /= g.sum()
    return np.outer(g, g)


def _ssim_map(mx, my, vx, vy, cxy):
    return ((2 * mx * my + C1) * (2 * cxy + C2)) / ((mx ** 2 + my ** 2 + C1) * (vx + vy + C2))


def ssim_gaussian(pred, target, size: int = 11, sigma: float = 1.5) -> float:
    p, t = _prep(pred, target)
    if min(p.shape) < size:
        raise ValueError(f"images must be at least {size}x{size} for windowed SSIM")
    w = gaussian_window(size, sigma)

    def filt(a):
        return np.einsum("ijkl,kl->ij", sliding_window_view(a, (size, size)), w)

    mx, my = filt(p), filt(t)
    vx = filt(p * p) - mx ** 2
    vy = filt(t * t) - my ** 2
    cxy = filt(p * t) - mx * my
    return float(np.mean(_ssim_map(mx, my, vx, vy, cxy)))


def ssim_block(pred, target, block: int = 8) -> float:
    p, t = _prep(pred, target)
    h, w = (p.shape[0] // block) * block, (p.shape[1] // block) * block
    if h == 0 or w == 0:
        raise ValueError(f"images must be at least {block}x{block} for block SSIM")

    def tiles(a):
        return a[:h, :w].reshape(h // block, block, w // block, block).transpose(0, 2, 1, 3).reshape(-1, block * block)

    a, b = tiles(p), tiles(t)
    mx, my = a.mean(1), b.mean(1)
    vx, vy = a.var(1), b.var(1)
    cxy = ((a - mx[:, None]) * (b - my[:, None])).mean(1)
    return float(np.mean(_ssim_map(mx, my, vx, vy, cxy)))


def image_metrics(pred, target) -> MetricsReport:
    r = rmse(pred, target)
    return MetricsReport(ssim=ssim_gaussian(pred, target), ssim_block=ssim_block(pred, target),
                         psnr=psnr_from_rmse(r), rmse=r)


def mean_report(reports) -> MetricsReport:
    reports = list(reports)
    return MetricsReport(*(float(np.mean([getattr(r, k) for r in reports])) for k in ("ssim", "ssim_block", "psnr", "rmse")))
