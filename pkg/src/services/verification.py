"""
Gradient verification suite behind the ``gradcheck`` command.

Every check compares autodiff against central differences on seeded inputs
and names the input tensor with the worst relative error.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..interfaces.errors import ConfigError
from ..models.config import LossConfig, ModelConfig
from ..tensor import (
    Tensor,
    absolute,
    add,
    avgpool2,
    block_means,
    broadcast_mul,
    check_gradients,
    concat,
    conv2d,
    dense,
    log,
    pap_channel,
    pap_global,
    relu,
    reshape,
    sigmoid,
    ssim_index,
    sum_,
    upsample_nearest,
)
from ..utils.logger import get_logger
from .camb import CambParams, camb_forward, init_camb_params
from .losses import total_loss
from .network import ModelParams, init_params, model_forward

logger = get_logger(__name__)

OP_TOLERANCE = 1e-5
CAMB_TOLERANCE = 1e-4
PIPELINE_TOLERANCE = 1e-3

Inputs = Dict[str, np.ndarray]
Builder = Callable[[np.random.Generator], Tuple[Callable[[Sequence[Tensor]], Tensor], Inputs]]


class GradientCheck(NamedTuple):
    name: str
    tolerance: float
    build: Builder
    eps: float = 1e-6
    max_entries: Optional[int] = None


@dataclass(frozen=True)
class CheckResult:
    """Worst relative error per input tensor of one check."""

    name: str
    tolerance: float
    errors: Dict[str, float]

    @property
    def worst(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def passed(self) -> bool:
        return self.worst < self.tolerance

    @property
    def failing(self) -> List[str]:
        return [name for name, error in self.errors.items() if error >= self.tolerance]

    def describe(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        line = f"{status} {self.name:<14} worst {self.worst:.2e} (tolerance {self.tolerance:.0e})"
        if not self.passed:
            line += f" in {', '.join(self.failing)}"
        return line


def _away_from_zero(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    # kinks of relu and |x| sit at 0
    return rng.choice([-1.0, 1.0], size=shape) * rng.uniform(0.1, 1.0, size=shape)


def _unary(op: Callable[[Tensor], Tensor], sampler: Callable[[np.random.Generator], np.ndarray]) -> Builder:
    # outputs are contracted with random weights so every entry reaches the scalar
    def build(rng: np.random.Generator):
        x = sampler(rng)
        weights = rng.uniform(-1.0, 1.0, size=op(Tensor(x)).shape)
        return (lambda ts: sum_(broadcast_mul(op(ts[0]), Tensor(weights)))), {"x": x}

    return build


def _binary(op: Callable[[Tensor, Tensor], Tensor], a_shape, b_shape) -> Builder:
    def build(rng: np.random.Generator):
        a, b = rng.normal(size=a_shape), rng.normal(size=b_shape)
        out_shape = op(Tensor(a), Tensor(b)).shape
        weights = rng.uniform(-1.0, 1.0, size=out_shape)
        return (lambda ts: sum_(broadcast_mul(op(ts[0], ts[1]), Tensor(weights)))), {"a": a, "b": b}

    return build


def _conv(stride: int, padding: int, size: int) -> Builder:
    def build(rng: np.random.Generator):
        inputs = {
            "input": rng.normal(size=(size, size, 2)),
            "kernel": rng.normal(size=(3, 3, 2, 3)),
            "bias": rng.normal(size=3),
        }
        probe = conv2d(Tensor(inputs["input"]), Tensor(inputs["kernel"]), Tensor(inputs["bias"]), stride, padding)
        weights = Tensor(rng.uniform(-1.0, 1.0, size=probe.shape))
        return (lambda ts: sum_(broadcast_mul(conv2d(ts[0], ts[1], ts[2], stride, padding), weights))), inputs

    return build


def _dense(rng: np.random.Generator):
    inputs = {"x": rng.normal(size=(1, 1, 4)), "weights": rng.normal(size=(4, 3)), "bias": rng.normal(size=3)}
    weights = Tensor(rng.uniform(-1.0, 1.0, size=(1, 1, 3)))
    return (lambda ts: sum_(broadcast_mul(dense(ts[0], ts[1], ts[2]), weights))), inputs


def _ssim(rng: np.random.Generator):
    a = rng.uniform(1.0, 5.0, size=(6, 6))
    b = a + 0.3 * rng.normal(size=a.shape)
    cfg = LossConfig()
    return (lambda ts: sum_(ssim_index(ts[0], ts[1], cfg.ssim_c1, cfg.ssim_c2))), {"a": a, "b": b}


def _camb(rng: np.random.Generator):
    params = init_camb_params(8, rng, p=3.0, reduction=4, dtype="float64")
    inputs = {"features": rng.uniform(0.1, 1.0, size=(6, 6, 8))}
    inputs.update({name: tensor.numpy() for name, tensor in params.named_tensors()})
    names = list(inputs)
    weights = Tensor(rng.uniform(-1.0, 1.0, size=(6, 6, 8)))

    def f(ts: Sequence[Tensor]) -> Tensor:
        bound = dict(zip(names, ts))
        features = bound.pop("features")
        block = CambParams(**bound, p=3.0, reduction=4)
        return sum_(broadcast_mul(camb_forward(features, block), weights))

    return f, inputs


def _loss(rng: np.random.Generator):
    y = rng.uniform(1.0, 9.0, size=(2, 8, 8))
    yhat = y + rng.normal(size=y.shape)
    cfg = LossConfig()
    return (lambda ts: total_loss(Tensor(y), ts[0], cfg)), {"prediction": yhat}


def _pipeline(rng: np.random.Generator):
    config = ModelConfig(stage_channels=(4, 8), reduction=4, dtype="float64")
    params = init_params(config, seed=int(rng.integers(2**31)))
    arrays = params.arrays()
    # positive head bias keeps the output relu away from its kink
    arrays["head.bias"] = np.ones_like(arrays["head.bias"])
    image = Tensor(rng.uniform(0.0, 1.0, size=(1, 16, 16, 3)))
    depth = Tensor(rng.uniform(1.0, 9.0, size=(1, 16, 16)))
    names = params.names
    cfg = LossConfig()

    def f(ts: Sequence[Tensor]) -> Tensor:
        model = ModelParams(config, dict(zip(names, ts)))
        prediction = model_forward(image, model)
        return total_loss(depth, reshape(prediction, prediction.shape[:-1]), cfg)

    return f, {name: arrays[name] for name in names}


def _positive(shape: Tuple[int, ...]) -> Callable[[np.random.Generator], np.ndarray]:
    return lambda rng: rng.uniform(0.5, 2.0, size=shape)


CHECKS: Tuple[GradientCheck, ...] = (
    GradientCheck("add", OP_TOLERANCE, _binary(add, (3, 4, 2), (3, 4, 2))),
    GradientCheck("broadcast_mul", OP_TOLERANCE, _binary(broadcast_mul, (1, 1, 3), (4, 5, 3))),
    GradientCheck("concat", OP_TOLERANCE, _binary(concat, (3, 3, 2), (3, 3, 4))),
    GradientCheck("absolute", OP_TOLERANCE, _unary(absolute, lambda rng: _away_from_zero(rng, (4, 4)))),
    GradientCheck("log", OP_TOLERANCE, _unary(log, _positive((4, 4)))),
    GradientCheck("sigmoid", OP_TOLERANCE, _unary(sigmoid, lambda rng: 3.0 * rng.normal(size=(4, 4)))),
    GradientCheck("relu", OP_TOLERANCE, _unary(relu, lambda rng: _away_from_zero(rng, (4, 4)))),
    GradientCheck("upsample", OP_TOLERANCE, _unary(upsample_nearest, lambda rng: rng.normal(size=(3, 3, 2)))),
    GradientCheck("avgpool2", OP_TOLERANCE, _unary(avgpool2, lambda rng: rng.normal(size=(4, 6, 2)))),
    GradientCheck("conv2d", OP_TOLERANCE, _conv(stride=1, padding=1, size=6)),
    GradientCheck("conv2d_stride2", OP_TOLERANCE, _conv(stride=2, padding=0, size=7)),
    GradientCheck("dense", OP_TOLERANCE, _dense),
    GradientCheck("pap_global", OP_TOLERANCE, _unary(lambda x: pap_global(x, 3.0), _positive((4, 4, 3)))),
    GradientCheck("pap_channel", OP_TOLERANCE, _unary(lambda x: pap_channel(x, 3.0), _positive((4, 4, 3)))),
    GradientCheck("block_means", OP_TOLERANCE, _unary(lambda x: block_means(x, 2), lambda rng: rng.normal(size=(5, 6)))),
    GradientCheck("ssim", OP_TOLERANCE, _ssim),
    GradientCheck("camb", CAMB_TOLERANCE, _camb, max_entries=40),
    GradientCheck("loss", CAMB_TOLERANCE, _loss),
    GradientCheck("pipeline", PIPELINE_TOLERANCE, _pipeline, max_entries=6),
)


def check_names() -> List[str]:
    return [check.name for check in CHECKS]


def run_check(check: GradientCheck, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    f, inputs = check.build(rng)
    tensors = [Tensor(value, dtype="float64") for value in inputs.values()]
    worst = check_gradients(f, tensors, eps=check.eps, max_entries=check.max_entries, seed=seed)
    return CheckResult(check.name, check.tolerance, dict(zip(inputs, worst)))


def run_gradient_suite(seed: int = 0, only: Optional[Sequence[str]] = None) -> List[CheckResult]:
    """Run every check (or the named subset) and log one line per check."""
    selected = list(CHECKS)
    if only:
        unknown = sorted(set(only) - set(check_names()))
        if unknown:
            raise ConfigError(f"unknown gradient checks: {', '.join(unknown)}", "gradcheck")
        selected = [check for check in CHECKS if check.name in only]

    results = []
    for check in selected:
        result = run_check(check, seed)
        (logger.info if result.passed else logger.error)(result.describe())
        results.append(result)
    return results
