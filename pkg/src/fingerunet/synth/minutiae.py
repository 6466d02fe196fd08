"""Ground-truth minutiae: binarise, Zhang-Suen thin, crossing number.

CN(p) = 1/2 * sum_i |P_i - P_(i+1)| over the cyclic 8-neighbourhood of a
skeleton pixel. CN == 1 marks a ridge ending, CN == 3 a bifurcation.
"""
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.ndimage import distance_transform_edt

from .. import kernels

BORDER_MARGIN = 8  # minutiae this close to the mask boundary are dropped
MIN_DISTANCE = 8
DOT_RADIUS = 3
RIDGE_THRESHOLD = 0.5  # ridges are the dark pixels


@dataclass(frozen=True)
class MinutiaPoint:
    row: int
    col: int
    kind: str  # "ending" | "bifurcation"


def thin(binary) -> np.ndarray:
    return kernels.zhang_suen(np.asarray(binary, dtype=np.uint8))


def crossing_number(skel) -> np.ndarray:
    return kernels.crossing_numbers(np.asarray(skel, dtype=np.uint8))


def minutiae_from_skeleton(skel, mask=None) -> List[MinutiaPoint]:
    """Scan-order minutiae of a skeleton, filtered by mask margin and mutual distance."""
    skel = np.asarray(skel, dtype=np.uint8)
    cn = crossing_number(skel)
    if mask is not None:
        # zero frame so the image edge counts as mask boundary
        dist = distance_transform_edt(np.pad(np.asarray(mask) > 0, 1))[1:-1, 1:-1]
        cn = np.where(dist > BORDER_MARGIN, cn, 0)
    accepted: List[MinutiaPoint] = []
    rows, cols = np.nonzero((cn == 1) | (cn == 3))
    for r, c in zip(rows.tolist(), cols.tolist()):
        if any((r - p.row) ** 2 + (c - p.col) ** 2 < MIN_DISTANCE ** 2 for p in accepted):
            continue
        accepted.append(MinutiaPoint(r, c, "ending" if cn[r, c] == 1 else "bifurcation"))
    return accepted


def paint_minutiae(points, shape, radius: int = DOT_RADIUS) -> np.ndarray:
    out = np.zeros(shape, dtype=np.uint8)
    yy, xx = np.indices(shape)
    for p in points:
        out[(yy - p.row) ** 2 + (xx - p.col) ** 2 <= radius * radius] = 1
    return out


def extract_minutiae(clean, mask) -> Tuple[List[MinutiaPoint], np.ndarray]:
    """Minutiae of a rendered ridge image and the painted {0, 1} dot map."""
    clean = np.asarray(clean, dtype=np.float64)
    mask = np.asarray(mask) > 0
    if not mask.any():
        return [], np.zeros(clean.shape, dtype=np.uint8)
    ridges = ((clean < RIDGE_THRESHOLD) & mask).astype(np.uint8)
    points = minutiae_from_skeleton(thin(ridges), mask)
    return points, paint_minutiae(points, clean.shape)
