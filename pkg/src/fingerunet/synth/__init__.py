"""Procedural fingerprint data: fields, ridge renders, minutiae, degradation, augmentation."""
from .augment import AugmentParams, augment_pair
from .dataset import generate_sample, load_dataset, load_sample, make_dataset
from .degrade import DegradeConfig, degrade
from .field import OrientationField, gen_orientation_field
from .minutiae import MinutiaPoint, extract_minutiae
from .render import render_ridge_pattern
from .sample import SamplePair

__all__ = [
    "AugmentParams", "augment_pair", "generate_sample", "load_dataset", "load_sample", "make_dataset",
    "DegradeConfig", "degrade", "OrientationField", "gen_orientation_field", "MinutiaPoint",
    "extract_minutiae", "render_ridge_pattern", "SamplePair",
]
