"""
Metric tables: per-image rows followed by the pooled and image-mean rows.
"""

import csv
import json
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

from ..interfaces.errors import ContractError
from ..models.metrics_report import COLUMN_TITLES, MetricsReport, columns_for
from .metrics import aggregate, mean_of_images

POOLED = "pooled"
IMAGE_MEAN = "image-mean"

Row = Tuple[str, List[float]]


def metric_rows(ids: Sequence[str], reports: Sequence[MetricsReport], metric_set: str = "kitti") -> List[Row]:
    """Per-image rows in input order, then the two aggregate rows."""
    if len(ids) != len(reports):
        raise ContractError(f"{len(ids)} ids for {len(reports)} reports", "report")
    columns = columns_for(metric_set)
    rows = [(sample_id, report.row(columns)) for sample_id, report in zip(ids, reports)]
    rows.append((POOLED, aggregate(reports).row(columns)))
    rows.append((IMAGE_MEAN, mean_of_images(reports).row(columns)))
    return rows


def format_table(rows: Sequence[Row], metric_set: str = "kitti") -> str:
    titles = [COLUMN_TITLES[name] for name in columns_for(metric_set)]
    width = max([len("id")] + [len(label) for label, _ in rows])
    lines = [f"{'id':<{width}}  " + "  ".join(f"{title:>8}" for title in titles)]
    for label, values in rows:
        lines.append(f"{label:<{width}}  " + "  ".join(f"{value:>8.4f}" for value in values))
    return "\n".join(lines)


def write_metrics_csv(path: Union[str, Path], rows: Sequence[Row], metric_set: str = "kitti") -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", *columns_for(metric_set)])
        for label, values in rows:
            writer.writerow([label, *values])


def metrics_document(
    ids: Sequence[str], reports: Sequence[MetricsReport], metric_set: str = "kitti"
) -> Dict[str, Any]:
    return {
        "metric_set": metric_set,
        "columns": list(columns_for(metric_set)),
        "images": [{"id": sample_id, **report.to_dict()} for sample_id, report in zip(ids, reports)],
        POOLED: aggregate(reports).to_dict(),
        IMAGE_MEAN: mean_of_images(reports).to_dict(),
    }


def write_metrics_json(
    path: Union[str, Path], ids: Sequence[str], reports: Sequence[MetricsReport], metric_set: str = "kitti"
) -> None:
    document = metrics_document(ids, reports, metric_set)
    Path(path).write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")
