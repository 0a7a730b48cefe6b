"""
Depth sample model - one RGB image with its ground-truth depth map.
"""

from dataclasses import dataclass

from ..interfaces.errors import ShapeError
from ..tensor import Tensor


@dataclass(frozen=True)
class DepthSample:
    """
    Training pair (I, D).

    image is H x W x 3 in [0, 1]; depth is H x W with positive values.
    """

    image: Tensor
    depth: Tensor
    id: str

    def __post_init__(self) -> None:
        if self.image.ndim != 3 or self.image.shape[-1] != 3:
            raise ShapeError(f"image must be H x W x 3, got {self.image.shape}", "data")
        if self.depth.shape != self.image.shape[:2]:
            raise ShapeError(
                f"depth {self.depth.shape} does not match image {self.image.shape[:2]}", "data"
            )

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]
