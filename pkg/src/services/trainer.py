"""
Depth training service - orchestrates training, evaluation and inference.

The service depends on the DepthSource abstraction only; synthetic scenes
and dataset directories are interchangeable.
"""

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..interfaces.depth_source import DepthSource
from ..interfaces.errors import CheckpointError, NumericalError
from ..models.config import RunConfig
from ..models.metrics_report import MetricsReport
from ..models.sample import DepthSample
from ..models.training_state import AdamState
from ..tensor import Tape, Tensor, backward, reshape
from ..utils.checkpoint import Checkpoint
from ..utils.logger import get_logger
from .augmentation import augment_flip
from .losses import loss_terms
from .metrics import evaluate
from .network import ModelParams, init_params, model_forward
from .optimizer import adam_step, collect_gradients

LOG_COLUMNS = ("step", "total_loss", "lambda", "depth_loss", "grad_loss")


@dataclass(frozen=True)
class StepRecord:
    """Loss components of one optimizer step."""

    step: int
    total_loss: float
    lam: float
    depth_loss: float
    grad_loss: float

    def row(self) -> Tuple[Union[int, float], ...]:
        return (self.step, self.total_loss, self.lam, self.depth_loss, self.grad_loss)


@dataclass(frozen=True)
class TrainingResult:
    params: ModelParams
    adam_state: AdamState
    history: List[StepRecord]


def smoothed(values: Sequence[float], window: int = 10) -> np.ndarray:
    """Trailing moving average; the first entries average what is available."""
    values = np.asarray(values, dtype=np.float64)
    cumulative = np.concatenate([[0.0], np.cumsum(values)])
    ends = np.arange(1, len(values) + 1)
    starts = np.maximum(ends - window, 0)
    return (cumulative[ends] - cumulative[starts]) / (ends - starts)


def stack_batch(samples: Sequence[DepthSample], dtype: str) -> Tuple[Tensor, Tensor]:
    images = np.stack([s.image.data for s in samples])
    depths = np.stack([s.depth.data for s in samples])
    return Tensor(images, dtype=dtype), Tensor(depths, dtype=dtype)


def predict_depth(params: ModelParams, image: Tensor) -> np.ndarray:
    """H x W depth prediction for one H x W x 3 image (no tape is recorded)."""
    batch = Tensor(image.data[None], dtype=params.config.dtype)
    return model_forward(batch, params).data[0, ..., 0].astype(np.float64)


def params_from_checkpoint(checkpoint: Checkpoint) -> ModelParams:
    """Rebuild a ModelParams whose registry matches the checkpoint exactly."""
    template = init_params(checkpoint.model)
    if template.names != checkpoint.parameter_names:
        raise CheckpointError("parameter names do not match the model described in the header")
    for name, tensor in template:
        if checkpoint.params[name].shape != tensor.shape:
            raise CheckpointError(
                f"parameter {name!r} has shape {checkpoint.params[name].shape}, expected {tensor.shape}"
            )
    return template.replace(checkpoint.params)


class DepthTrainingService:
    """
    Trains, evaluates and runs the depth network for one RunConfig.
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self.logger = get_logger(__name__)

    def train(self, source: DepthSource, params: Optional[ModelParams] = None) -> TrainingResult:
        """Run ``config.steps`` Adam steps over random flipped batches of ``source``."""
        cfg = self.config
        if params is None:
            params = init_params(cfg.model, cfg.seed)
        state = AdamState.zeros_like(params.arrays())
        self._log_overhead(params)

        pool = list(source)
        rng = np.random.default_rng(cfg.seed)
        batch_size = min(cfg.batch_size, len(pool))
        history: List[StepRecord] = []

        for step in range(1, cfg.steps + 1):
            chosen = rng.choice(len(pool), size=batch_size, replace=False)
            batch = [augment_flip(pool[i], cfg.zeta, cfg.eta, rng) for i in chosen]
            images, depths = stack_batch(batch, cfg.model.dtype)

            with Tape() as tape:
                prediction = model_forward(images, params)
                terms = loss_terms(depths, reshape(prediction, prediction.shape[:-1]), cfg.loss, cfg.ablation)
            grads = backward(terms.total, tape)
            params, state = adam_step(
                params, collect_gradients(params, grads), state, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps
            )

            record = StepRecord(
                step, terms.total.item(), terms.lam.item(), terms.depth.item(), terms.grad.item()
            )
            if not np.isfinite(record.total_loss):
                raise NumericalError(f"loss became non-finite at step {step}", "trainer")
            history.append(record)
            if step % cfg.log_every == 0 or step == cfg.steps:
                self.logger.info(
                    f"step {step}/{cfg.steps} loss {record.total_loss:.5f} "
                    f"lambda {record.lam:.4f} depth {record.depth_loss:.4f} grad {record.grad_loss:.4f}"
                )

        if history:
            curve = smoothed([r.total_loss for r in history])
            self.logger.info(f"Smoothed loss: first {curve[0]:.5f}, last {curve[-1]:.5f}")
        return TrainingResult(params=params, adam_state=state, history=history)

    def evaluate(
        self, params: Optional[ModelParams], source: DepthSource
    ) -> Tuple[List[str], List[MetricsReport]]:
        """Per-image reports; with ``gt_as_pred`` ground truth is scored against itself."""
        ids, reports = [], []
        for sample in source:
            if self.config.gt_as_pred or params is None:
                prediction = sample.depth.data
            else:
                prediction = predict_depth(params, sample.image)
            reports.append(evaluate(prediction, sample.depth, self.config.min_valid_depth))
            ids.append(sample.id)
            self.logger.debug(f"{sample.id}: abs.rel {reports[-1].abs_rel:.4f}")
        return ids, reports

    def _log_overhead(self, params: ModelParams) -> None:
        total = params.count()
        attention = params.count("camb.")
        share = 100.0 * attention / total if total else 0.0
        self.logger.info(f"Model parameters: {total} ({attention} in CAMB blocks, {share:.2f}%)")


def write_loss_log(path: Union[str, Path], history: Sequence[StepRecord]) -> None:
    """Header line, then one comma-delimited row per step."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(LOG_COLUMNS)
        for record in history:
            writer.writerow(record.row())
