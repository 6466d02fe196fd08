"""Paired geometric augmentation.

One affine map (shear, then rotation, then flips, then translation, about the
image centre) is applied to every raster of a sample. Images are resampled
bilinearly with white fill; the minutia map and mask use nearest neighbour
with zero fill. Orientation angles are resampled nearest-neighbour and then
pushed through the linear part of the map, which gives theta + alpha for a
rotation and pi - theta for either flip.
"""
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import affine_transform

from .field import OrientationField
from .sample import SamplePair

MAX_ROTATION_DEG = 15.0
MAX_SHIFT_FRAC = 0.10
MAX_SHEAR = 0.10


@dataclass(frozen=True)
class AugmentParams:
    rotation_deg: float = 0.0
    dx: float = 0.0  # columns
    dy: float = 0.0  # rows
    hflip: bool = False
    vflip: bool = False
    shear: float = 0.0

    def is_identity(self) -> bool:
        return (self.rotation_deg == 0 and self.dx == 0 and self.dy == 0 and not self.hflip
                and not self.vflip and self.shear == 0)

    def validate(self, h: int, w: int) -> None:
        if abs(self.rotation_deg) > MAX_ROTATION_DEG:
            raise ValueError(f"rotation {self.rotation_deg} deg exceeds +-{MAX_ROTATION_DEG}")
        if abs(self.dx) > MAX_SHIFT_FRAC * w or abs(self.dy) > MAX_SHIFT_FRAC * h:
            raise ValueError(f"translation ({self.dx}, {self.dy}) exceeds 10% of {w}x{h}")
        if abs(self.shear) > MAX_SHEAR:
            raise ValueError(f"shear {self.shear} exceeds {MAX_SHEAR}")

    @classmethod
    def random(cls, gen: np.random.Generator, h: int, w: int, rotation_deg=MAX_ROTATION_DEG,
               shift_frac=MAX_SHIFT_FRAC, shear=MAX_SHEAR, flips=True) -> "AugmentParams":
        """Uniform draws inside the given ranges (always the same number of draws)."""
        u = gen.uniform(-1, 1, size=4)
        f = gen.random(2) < 0.5
        return cls(rotation_deg * u[0], int(shift_frac * w * u[1]), int(shift_frac * h * u[2]),
                   bool(f[0] and flips), bool(f[1] and flips), shear * u[3])


def linear_part(p: AugmentParams) -> np.ndarray:
    """2x2 forward map acting on (col, row) displacement vectors."""
    a = math.radians(p.rotation_deg)
    shear = np.array([[1.0, p.shear], [0.0, 1.0]])
    rot = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    flip = np.diag([-1.0 if p.hflip else 1.0, -1.0 if p.vflip else 1.0])
    return flip @ rot @ shear


def _warp(img, inv_rc, offset, order, cval):
    return affine_transform(np.asarray(img, dtype=np.float64), inv_rc, offset=offset, order=order,
                            mode="constant", cval=cval, prefilter=False)


def warp_setup(p: AugmentParams, h: int, w: int):
    """(matrix, offset) for scipy's output->input pull-back in (row, col) index space."""
    a_xy = linear_part(p)
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    a_rc = swap @ a_xy @ swap
    inv = np.linalg.inv(a_rc)
    centre = np.array([(h - 1) / 2, (w - 1) / 2])
    shift = np.array([p.dy, p.dx])
    # input = inv @ (out - centre - shift) + centre
    offset = centre - inv @ (centre + shift)
    return inv, offset


def warp_image(img, p: AugmentParams, cval=1.0):
    inv, off = warp_setup(p, *np.shape(img))
    return _warp(img, inv, off, 1, cval)


def warp_map(m, p: AugmentParams):
    inv, off = warp_setup(p, *np.shape(m))
    return np.rint(_warp(m, inv, off, 0, 0.0)).astype(np.asarray(m).dtype)


def rotate_angles(theta, p: AugmentParams) -> np.ndarray:
    a = linear_part(p)
    t = np.stack([np.cos(theta), np.sin(theta)])
    u = np.tensordot(a, t, axes=1)
    out = np.mod(np.arctan2(u[1], u[0]), np.pi)
    return np.where(out >= np.pi, 0.0, out)


def augment_pair(s: SamplePair, p: AugmentParams) -> SamplePair:
    h, w = s.clean.shape
    p.validate(h, w)
    if p.is_identity():
        return replace(
            s,
            degraded=s.degraded.copy(), clean=s.clean.copy(), minutia_map=s.minutia_map.copy(),
            orientation=OrientationField(s.orientation.theta.copy(), s.orientation.mask.copy()),
        )
    inv, off = warp_setup(p, h, w)
    mask = np.rint(_warp(s.orientation.mask, inv, off, 0, 0.0)).astype(np.uint8)
    theta = rotate_angles(_warp(s.orientation.theta, inv, off, 0, 0.0), p)
    return replace(
        s,
        degraded=np.clip(_warp(s.degraded, inv, off, 1, 1.0), 0, 1),
        clean=np.clip(_warp(s.clean, inv, off, 1, 1.0), 0, 1),
        minutia_map=np.rint(_warp(s.minutia_map, inv, off, 0, 0.0)).astype(np.uint8),
        orientation=OrientationField(np.where(mask > 0, theta, 0.0), mask),
    )
