from dataclasses import dataclass, field

import numpy as np

from .field import OrientationField


@dataclass
class SamplePair:
    degraded: np.ndarray  # (h, w) in [0, 1]
    clean: np.ndarray  # (h, w) in [0, 1]
    minutia_map: np.ndarray  # (h, w) uint8 {0, 1}
    orientation: OrientationField
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        shapes = {self.degraded.shape, self.clean.shape, self.minutia_map.shape,
                  self.orientation.theta.shape, self.orientation.mask.shape}
        if len(shapes) != 1:
            raise ValueError(f"all sample rasters must share dims, got {sorted(shapes)}")

    @property
    def shape(self):
        return self.clean.shape
