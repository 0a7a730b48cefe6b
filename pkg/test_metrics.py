"""
Evaluation metrics, aggregation and metric tables.
"""

import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from src.interfaces.errors import ContractError, EvaluationError, ShapeError
from src.models.metrics_report import KITTI_COLUMNS, NYU_COLUMNS
from src.services.metrics import DELTA_THRESHOLDS, aggregate, evaluate, mean_of_images
from src.services.reporting import (
    IMAGE_MEAN,
    POOLED,
    format_table,
    metric_rows,
    metrics_document,
    write_metrics_csv,
    write_metrics_json,
)

positive_maps = arrays(np.float64, (5, 5), elements=st.floats(0.05, 20.0))


def loop_metrics(pred, gt):
    n = pred.size
    sq, log_rel, abs_rel, sq_rel, hits = 0.0, 0.0, 0.0, 0.0, [0, 0, 0]
    for d, t in zip(pred.ravel(), gt.ravel()):
        sq += (d - t) ** 2
        log_rel += abs(math.log10(d) - math.log10(t))
        abs_rel += abs(d - t) / t
        sq_rel += (d - t) ** 2 / t
        ratio = max(d / t, t / d)
        for k, threshold in enumerate(DELTA_THRESHOLDS):
            hits[k] += ratio < threshold
    return {
        "rmse": math.sqrt(sq / n),
        "log_rel": log_rel / n,
        "abs_rel": abs_rel / n,
        "sq_rel": sq_rel / n,
        "delta1": hits[0] / n,
        "delta2": hits[1] / n,
        "delta3": hits[2] / n,
    }


class TestEvaluate:
    def test_identity(self, rng):
        gt = rng.uniform(1, 10, size=(8, 8))
        report = evaluate(gt, gt)
        assert (report.rmse, report.log_rel, report.abs_rel, report.sq_rel) == (0, 0, 0, 0)
        assert (report.delta1, report.delta2, report.delta3) == (1.0, 1.0, 1.0)
        assert report.n_valid == 64

    def test_single_pixel_double(self):
        report = evaluate(np.array([[2.0]]), np.array([[1.0]]))
        assert report.rmse == 1.0
        assert report.abs_rel == 1.0
        assert report.sq_rel == 1.0
        assert report.log_rel == math.log10(2.0)
        assert (report.delta1, report.delta2, report.delta3) == (0.0, 0.0, 0.0)

    def test_single_pixel_thirty_percent(self):
        report = evaluate(np.array([[1.3]]), np.array([[1.0]]))
        assert (report.delta1, report.delta2, report.delta3) == (0.0, 1.0, 1.0)

    def test_thresholds(self):
        assert DELTA_THRESHOLDS == (1.25, 1.5625, 1.953125)

    def test_validity_mask(self):
        pred = np.array([[2.0, 0.0, 5.0]])
        gt = np.array([[1.0, 3.0, 0.0]])
        report = evaluate(pred, gt)
        assert report.n_valid == 1
        assert report.rmse == 1.0

    def test_empty_mask(self):
        with pytest.raises(EvaluationError):
            evaluate(np.zeros((2, 2)), np.ones((2, 2)))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            evaluate(np.ones((2, 2)), np.ones((2, 3)))

    def test_matches_loop_oracle(self, rng):
        for _ in range(20):
            pred, gt = rng.uniform(0.1, 10, size=(8, 8)), rng.uniform(0.1, 10, size=(8, 8))
            report = evaluate(pred, gt)
            for field, value in loop_metrics(pred, gt).items():
                assert getattr(report, field) == pytest.approx(value, abs=1e-12)

    def test_delta_nesting_on_random_pairs(self, rng):
        for _ in range(1000):
            pred, gt = rng.uniform(0.1, 10, size=4), rng.uniform(0.1, 10, size=4)
            report = evaluate(pred, gt)
            assert report.delta1 <= report.delta2 <= report.delta3

    @given(positive_maps, positive_maps, st.floats(0.1, 100.0))
    def test_scaling(self, pred, gt, k):
        base, scaled = evaluate(pred, gt), evaluate(k * pred, k * gt)
        assert scaled.abs_rel == pytest.approx(base.abs_rel, rel=1e-9, abs=1e-12)
        assert scaled.log_rel == pytest.approx(base.log_rel, rel=1e-9, abs=1e-9)
        assert scaled.rmse == pytest.approx(k * base.rmse, rel=1e-9, abs=1e-12)
        assert scaled.sq_rel == pytest.approx(k * base.sq_rel, rel=1e-9, abs=1e-12)

    def test_permutation_invariance(self, rng):
        pred, gt = rng.uniform(0.1, 10, size=(6, 6)), rng.uniform(0.1, 10, size=(6, 6))
        order = rng.permutation(36)
        a = evaluate(pred, gt)
        b = evaluate(pred.ravel()[order].reshape(6, 6), gt.ravel()[order].reshape(6, 6))
        for field in KITTI_COLUMNS:
            assert getattr(b, field) == pytest.approx(getattr(a, field), abs=1e-12)


class TestAggregate:
    def test_single_report(self, rng):
        report = evaluate(rng.uniform(1, 2, size=(3, 3)), rng.uniform(1, 2, size=(3, 3)))
        single = aggregate([report])
        assert single.row() == pytest.approx(report.row(), abs=1e-12)
        assert single.n_valid == report.n_valid

    def test_identical_reports_double_count(self, rng):
        report = evaluate(rng.uniform(1, 2, size=(3, 3)), rng.uniform(1, 2, size=(3, 3)))
        pooled = aggregate([report, report])
        assert pooled.row() == pytest.approx(report.row(), abs=1e-12)
        assert pooled.n_valid == 2 * report.n_valid

    def test_matches_pooled_recomputation(self, rng):
        pred_a, gt_a = rng.uniform(0.5, 5, size=1), rng.uniform(0.5, 5, size=1)
        pred_b, gt_b = rng.uniform(0.5, 5, size=3), rng.uniform(0.5, 5, size=3)
        pooled = aggregate([evaluate(pred_a, gt_a), evaluate(pred_b, gt_b)])
        direct = evaluate(np.concatenate([pred_a, pred_b]), np.concatenate([gt_a, gt_b]))
        assert pooled.row() == pytest.approx(direct.row(), abs=1e-12)
        assert pooled.n_valid == 4

    def test_image_mean_is_unweighted(self):
        a = evaluate(np.array([2.0]), np.array([1.0]))
        b = evaluate(np.ones(3), np.ones(3))
        assert mean_of_images([a, b]).abs_rel == 0.5
        assert aggregate([a, b]).abs_rel == 0.25

    def test_empty_list(self):
        with pytest.raises(ContractError):
            aggregate([])
        with pytest.raises(ContractError):
            mean_of_images([])


class TestMetricTables:
    @pytest.fixture
    def reports(self, rng):
        gts = [rng.uniform(1, 9, size=(4, 4)) for _ in range(2)]
        return ["a", "b"], [evaluate(gt * 1.1, gt) for gt in gts]

    def test_rows_end_with_aggregates(self, reports):
        ids, items = reports
        rows = metric_rows(ids, items)
        assert [label for label, _ in rows] == ["a", "b", POOLED, IMAGE_MEAN]
        assert all(len(values) == len(KITTI_COLUMNS) for _, values in rows)

    def test_nyu_set_drops_sq_rel(self, reports):
        ids, items = reports
        rows = metric_rows(ids, items, "nyu")
        assert all(len(values) == len(NYU_COLUMNS) for _, values in rows)
        assert "sq.rel" not in format_table(rows, "nyu").splitlines()[0]

    def test_identity_row(self, rng):
        gt = rng.uniform(1, 9, size=(4, 4))
        rows = metric_rows(["x"], [evaluate(gt, gt)])
        assert rows[0][1] == [1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]

    def test_files(self, reports, tmp_path):
        ids, items = reports
        rows = metric_rows(ids, items)
        write_metrics_csv(tmp_path / "metrics.csv", rows)
        write_metrics_json(tmp_path / "metrics.json", ids, items)
        with open(tmp_path / "metrics.csv") as handle:
            table = list(csv.reader(handle))
        assert table[0] == ["id", *KITTI_COLUMNS]
        assert [row[0] for row in table[1:]] == ["a", "b", POOLED, IMAGE_MEAN]
        document = json.loads((tmp_path / "metrics.json").read_text())
        assert document == json.loads(json.dumps(metrics_document(ids, items)))
        assert [image["id"] for image in document["images"]] == ids

    def test_mismatched_ids(self, reports):
        with pytest.raises(ContractError):
            metric_rows(["only-one"], reports[1])
