"""
Optimizer state model.
"""

from dataclasses import dataclass, field
from typing import Dict

import numpy as np


@dataclass(frozen=True)
class AdamState:
    """First and second moment estimates per registered parameter, plus the step counter."""

    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros_like(cls, registry: Dict[str, "np.ndarray"]) -> "AdamState":
        return cls(
            m={name: np.zeros_like(value) for name, value in registry.items()},
            v={name: np.zeros_like(value) for name, value in registry.items()},
            step=0,
        )
