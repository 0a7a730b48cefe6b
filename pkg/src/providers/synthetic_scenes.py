"""
Synthetic rectangles-with-depth scenes.

A far background plane at depth_max plus axis-aligned rectangles at random
depths in (0.1 * depth_max, depth_max), painted far to near so nearer
rectangles occlude farther ones. Each region is shaded with brightness that
falls with depth, times a seeded per-region tint, so depth can be read off
appearance.
"""

from dataclasses import replace
from typing import List, NamedTuple

import numpy as np

from ..interfaces.depth_source import DepthSource
from ..models.config import SceneSpec
from ..models.sample import DepthSample
from ..tensor import Tensor
from ..utils.logger import get_logger

logger = get_logger(__name__)

NEAR_FRACTION = 0.1


class Rectangle(NamedTuple):
    top: int
    left: int
    bottom: int  # exclusive
    right: int  # exclusive
    depth: float
    tint: np.ndarray


def shade(depth: float, depth_max: float, tint: np.ndarray) -> np.ndarray:
    """RGB color of a region: brightness 1 at depth 0 falling to 0.2 at depth_max."""
    brightness = 1.0 - 0.8 * depth / depth_max
    return np.clip(brightness * tint, 0.0, 1.0)


def scene_rectangles(spec: SceneSpec) -> List[Rectangle]:
    """The rectangles of a scene in painting order (farthest first)."""
    rng = np.random.default_rng(spec.seed)
    rectangles = []
    for _ in range(spec.n_shapes):
        rows = np.sort(rng.integers(0, spec.height + 1, size=2))
        cols = np.sort(rng.integers(0, spec.width + 1, size=2))
        # at least one pixel in each direction
        bottom = max(int(rows[1]), int(rows[0]) + 1)
        right = max(int(cols[1]), int(cols[0]) + 1)
        top = min(int(rows[0]), spec.height - 1)
        left = min(int(cols[0]), spec.width - 1)
        depth = float(rng.uniform(NEAR_FRACTION, 1.0) * spec.depth_max)
        tint = rng.uniform(0.75, 1.0, size=3)
        rectangles.append(Rectangle(top, left, bottom, right, depth, tint))
    # stable sort keeps generation order among equal depths
    return sorted(rectangles, key=lambda r: -r.depth)


def synth_scene(spec: SceneSpec) -> DepthSample:
    """Deterministic scene for ``spec``; a pure function of its fields."""
    background_tint = np.random.default_rng([spec.seed, 1]).uniform(0.75, 1.0, size=3)
    depth = np.full((spec.height, spec.width), spec.depth_max, dtype=np.float64)
    image = np.empty((spec.height, spec.width, 3), dtype=np.float64)
    image[...] = shade(spec.depth_max, spec.depth_max, background_tint)

    for rect in scene_rectangles(spec):
        region = (slice(rect.top, rect.bottom), slice(rect.left, rect.right))
        depth[region] = rect.depth
        image[region] = shade(rect.depth, spec.depth_max, rect.tint)

    return DepthSample(image=Tensor(image), depth=Tensor(depth), id=f"scene_{spec.seed:08d}")


class SyntheticSceneSource(DepthSource):
    """``count`` scenes whose seeds are ``base.seed + index``."""

    def __init__(self, base: SceneSpec, count: int):
        base.validate()
        self.base = base
        self.count = count
        logger.debug(f"Synthetic source: {count} scenes from seed {base.seed}")

    def __len__(self) -> int:
        return self.count

    def spec_for(self, index: int) -> SceneSpec:
        if not 0 <= index < self.count:
            raise IndexError(f"scene index {index} out of range 0..{self.count - 1}")
        return replace(self.base, seed=self.base.seed + index)

    def sample(self, index: int) -> DepthSample:
        return synth_scene(self.spec_for(index))

    @property
    def ids(self) -> List[str]:
        return [f"scene_{self.base.seed + i:08d}" for i in range(self.count)]
