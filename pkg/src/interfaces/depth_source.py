"""
Depth source interface.

High-level services (training, evaluation, inference) depend on this
abstraction, never on where samples come from.
"""

from abc import ABC, abstractmethod
from typing import TYPE_CHECKING, Iterator, List

if TYPE_CHECKING:
    from ..models.sample import DepthSample


class DepthSource(ABC):
    """Indexed, deterministic collection of RGB + depth samples."""

    @abstractmethod
    def __len__(self) -> int:
        """Number of samples."""

    @abstractmethod
    def sample(self, index: int) -> "DepthSample":
        """
        Return sample ``index``; the same index always yields the same sample.

        Raises:
            IndexError: index out of range
            FormatError: the backing files are malformed
        """

    @property
    @abstractmethod
    def ids(self) -> List[str]:
        """Sample ids in index order."""

    def __iter__(self) -> Iterator["DepthSample"]:
        for index in range(len(self)):
            yield self.sample(index)
