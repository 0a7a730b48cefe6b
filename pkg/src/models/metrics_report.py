"""
Metrics report model - immutable result of one evaluation.
"""

from dataclasses import asdict, dataclass
from typing import Dict, List, Tuple

# Column order of the published comparison tables.
KITTI_COLUMNS: Tuple[str, ...] = ("delta1", "delta2", "delta3", "rmse", "log_rel", "abs_rel", "sq_rel")
NYU_COLUMNS: Tuple[str, ...] = ("delta1", "delta2", "delta3", "rmse", "log_rel", "abs_rel")

COLUMN_TITLES: Dict[str, str] = {
    "delta1": "d1",
    "delta2": "d2",
    "delta3": "d3",
    "rmse": "RMSE",
    "log_rel": "log.rel",
    "abs_rel": "abs.rel",
    "sq_rel": "sq.rel",
}


def columns_for(metric_set: str) -> Tuple[str, ...]:
    return NYU_COLUMNS if metric_set == "nyu" else KITTI_COLUMNS


@dataclass(frozen=True)
class MetricsReport:
    """
    Error and accuracy metrics over the valid pixels of one or more images.

    Deltas are fractions in [0, 1] and nest: delta1 <= delta2 <= delta3.
    """

    rmse: float
    log_rel: float
    abs_rel: float
    sq_rel: float
    delta1: float
    delta2: float
    delta3: float
    n_valid: int

    def row(self, columns: Tuple[str, ...] = KITTI_COLUMNS) -> List[float]:
        return [getattr(self, name) for name in columns]

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)
