"""
Flip augmentation.

Vertical flip with probability zeta, horizontal flip with probability eta,
applied identically to image and depth. No rotations or distortions: they
would invent geometry the ground truth does not have.
"""

import numpy as np

from ..interfaces.errors import ParameterError
from ..models.sample import DepthSample
from ..tensor import Tensor


def flip_sample(sample: DepthSample, vertical: bool, horizontal: bool) -> DepthSample:
    image, depth = sample.image.data, sample.depth.data
    if vertical:
        image, depth = image[::-1], depth[::-1]
    if horizontal:
        image, depth = image[:, ::-1], depth[:, ::-1]
    return DepthSample(image=Tensor(image), depth=Tensor(depth), id=sample.id)


def augment_flip(
    sample: DepthSample, zeta: float, eta: float, rng: np.random.Generator
) -> DepthSample:
    """Randomly flip ``sample``; draws exactly two uniforms from ``rng`` per call."""
    if not (0.0 <= zeta <= 1.0 and 0.0 <= eta <= 1.0):
        raise ParameterError(f"flip probabilities must lie in [0, 1], got {zeta}, {eta}", "data")
    vertical = rng.random() < zeta
    horizontal = rng.random() < eta
    if not (vertical or horizontal):
        return sample
    return flip_sample(sample, vertical, horizontal)
