"""
Differentiable operation interface.

Every primitive of the tensor core implements this contract: a forward pass
over raw arrays, and a backward pass mapping the gradient of the output to one
gradient per input. The tape only ever talks to this abstraction.
"""

from abc import ABC, abstractmethod
from typing import Any, Optional, Tuple

import numpy as np


class Operation(ABC):
    """
    Abstract differentiable operation.

    An instance is created per call and may stash whatever forward values its
    gradient rule needs on ``self``. Instances are never reused across calls.
    """

    name = "op"

    @abstractmethod
    def forward(self, *inputs: np.ndarray, **kwargs: Any) -> np.ndarray:
        """
        Compute the output array from the input arrays.

        Raises:
            CambError subclasses when the inputs violate the operation contract
        """

    @abstractmethod
    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        """
        Return d(loss)/d(input) for every input, given d(loss)/d(output).

        Entries may be None for inputs that are not differentiable
        (integer indices, constants).
        """
