"""
Depth evaluation metrics.

All metrics are computed over the validity mask
{i : gt_i >= min_valid_depth and pred_i > 0}.
"""

from typing import Sequence, Union

import numpy as np

from ..interfaces.errors import ContractError, EvaluationError, ShapeError
from ..models.metrics_report import MetricsReport
from ..tensor import Tensor

DELTA_THRESHOLDS = (1.25, 1.25**2, 1.25**3)

DepthLike = Union[Tensor, np.ndarray]


def _as_array(value: DepthLike) -> np.ndarray:
    array = value.data if isinstance(value, Tensor) else np.asarray(value)
    return array.astype(np.float64)


def evaluate(pred: DepthLike, gt: DepthLike, min_valid_depth: float = 1e-3) -> MetricsReport:
    """
    Error and accuracy metrics of one prediction against ground truth.

    Raises:
        ShapeError: shapes differ
        EvaluationError: no pixel passes the validity mask
    """
    pred_values, gt_values = _as_array(pred), _as_array(gt)
    if pred_values.shape != gt_values.shape:
        raise ShapeError(f"prediction {pred_values.shape} vs ground truth {gt_values.shape}", "metrics")
    valid = (gt_values >= min_valid_depth) & (pred_values > 0)
    if not valid.any():
        raise EvaluationError("validity mask is empty", "metrics")

    d, t = pred_values[valid], gt_values[valid]
    diff = d - t
    ratio = np.maximum(d / t, t / d)
    return MetricsReport(
        rmse=float(np.sqrt(np.mean(diff**2))),
        log_rel=float(np.mean(np.abs(np.log10(d) - np.log10(t)))),
        abs_rel=float(np.mean(np.abs(diff) / t)),
        sq_rel=float(np.mean(diff**2 / t)),
        delta1=float(np.mean(ratio < DELTA_THRESHOLDS[0])),
        delta2=float(np.mean(ratio < DELTA_THRESHOLDS[1])),
        delta3=float(np.mean(ratio < DELTA_THRESHOLDS[2])),
        n_valid=int(valid.sum()),
    )


def aggregate(reports: Sequence[MetricsReport]) -> MetricsReport:
    """
    Pixel-pooled aggregate: n_valid-weighted means, RMSE pooled on squared errors.
    """
    if not reports:
        raise ContractError("cannot aggregate an empty list of reports", "metrics")
    weights = np.array([r.n_valid for r in reports], dtype=np.float64)
    total = weights.sum()

    def pooled(field: str) -> float:
        return float(np.dot(weights, [getattr(r, field) for r in reports]) / total)

    return MetricsReport(
        rmse=float(np.sqrt(np.dot(weights, [r.rmse**2 for r in reports]) / total)),
        log_rel=pooled("log_rel"),
        abs_rel=pooled("abs_rel"),
        sq_rel=pooled("sq_rel"),
        delta1=pooled("delta1"),
        delta2=pooled("delta2"),
        delta3=pooled("delta3"),
        n_valid=int(total),
    )


def mean_of_images(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Unweighted average of per-image reports; n_valid is summed."""
    if not reports:
        raise ContractError("cannot average an empty list of reports", "metrics")

    def average(field: str) -> float:
        return float(np.mean([getattr(r, field) for r in reports]))

    return MetricsReport(
        rmse=average("rmse"),
        log_rel=average("log_rel"),
        abs_rel=average("abs_rel"),
        sq_rel=average("sq_rel"),
        delta1=average("delta1"),
        delta2=average("delta2"),
        delta3=average("delta3"),
        n_valid=sum(r.n_valid for r in reports),
    )
