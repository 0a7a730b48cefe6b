"""
Convolutional attention mechanism block (CAMB).

Channel attention then spatial attention, both driven by power-average
pooling, with the attended features added back onto the input:

    F_ca    = s(DNN(pap_global(F)))          1 x 1 x C
    F_sa_in = F_ca * F                       H x W x C
    F_sa    = s(conv7x7(pap_channel(F_sa_in)))  H x W x 1
    out     = F_sa * F_sa_in + F
"""

from dataclasses import dataclass
from typing import Dict, Iterator, Tuple

import numpy as np

from ..interfaces.errors import ConfigError, ShapeError
from ..tensor import Tensor, add, broadcast_mul, conv2d, dense, pap_channel, pap_global, relu, sigmoid

SPATIAL_KERNEL_SIZE = 7

PARAM_NAMES: Tuple[str, ...] = (
    "mlp_w1",
    "mlp_b1",
    "mlp_w2",
    "mlp_b2",
    "mlp_w3",
    "mlp_b3",
    "spatial_kernel",
    "spatial_bias",
)


@dataclass(frozen=True)
class CambParams:
    """
    Learnable parameters of one block.

    Three dense layers C -> C/r -> C/r -> C and one 7x7 kernel with a single
    input and output channel. One instance per skip connection.
    """

    mlp_w1: Tensor
    mlp_b1: Tensor
    mlp_w2: Tensor
    mlp_b2: Tensor
    mlp_w3: Tensor
    mlp_b3: Tensor
    spatial_kernel: Tensor
    spatial_bias: Tensor
    p: float = 3.0
    reduction: int = 4

    @property
    def channels(self) -> int:
        return self.mlp_w1.shape[0]

    def named_tensors(self) -> Iterator[Tuple[str, Tensor]]:
        for name in PARAM_NAMES:
            yield name, getattr(self, name)

    @classmethod
    def from_registry(
        cls, registry: Dict[str, Tensor], prefix: str, p: float, reduction: int
    ) -> "CambParams":
        return cls(**{name: registry[f"{prefix}.{name}"] for name in PARAM_NAMES}, p=p, reduction=reduction)


def glorot_uniform(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    """Uniform in +-sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_camb_params(
    channels: int,
    rng: np.random.Generator,
    p: float = 3.0,
    reduction: int = 4,
    dtype: str = "float64",
) -> CambParams:
    """Seeded Glorot-uniform weights, zero biases."""
    if reduction < 1 or channels % reduction:
        raise ConfigError(f"reduction ratio {reduction} must divide channel count {channels}", "camb")
    hidden = channels // reduction
    k = SPATIAL_KERNEL_SIZE

    def param(array: np.ndarray) -> Tensor:
        return Tensor(array, requires_grad=True, dtype=dtype)

    return CambParams(
        mlp_w1=param(glorot_uniform(rng, (channels, hidden), channels, hidden)),
        mlp_b1=param(np.zeros(hidden)),
        mlp_w2=param(glorot_uniform(rng, (hidden, hidden), hidden, hidden)),
        mlp_b2=param(np.zeros(hidden)),
        mlp_w3=param(glorot_uniform(rng, (hidden, channels), hidden, channels)),
        mlp_b3=param(np.zeros(channels)),
        spatial_kernel=param(glorot_uniform(rng, (k, k, 1, 1), k * k, k * k)),
        spatial_bias=param(np.zeros(1)),
        p=p,
        reduction=reduction,
    )


def channel_attention(features: Tensor, params: CambParams) -> Tensor:
    """Per-channel scaling map (1 x 1 x C), every value in (0, 1)."""
    if features.shape[-1] != params.channels:
        raise ShapeError(
            f"CAMB built for {params.channels} channels, feature map has {features.shape[-1]}", "camb"
        )
    pooled = pap_global(features, params.p)
    hidden = relu(dense(pooled, params.mlp_w1, params.mlp_b1))
    hidden = relu(dense(hidden, params.mlp_w2, params.mlp_b2))
    return sigmoid(dense(hidden, params.mlp_w3, params.mlp_b3))


def spatial_attention(features: Tensor, params: CambParams) -> Tensor:
    """Per-position scaling map (H x W x 1); zero padding keeps H x W."""
    if features.ndim not in (3, 4) or min(features.shape[-3:-1]) < 1:
        raise ShapeError(f"spatial attention needs an H x W x C map, got {features.shape}", "camb")
    pooled = pap_channel(features, params.p)
    padding = SPATIAL_KERNEL_SIZE // 2
    return sigmoid(conv2d(pooled, params.spatial_kernel, params.spatial_bias, stride=1, padding=padding))


def camb_forward(features: Tensor, params: CambParams) -> Tensor:
    """Attend to ``features`` and add the result back; output shape equals input shape."""
    sa_input = broadcast_mul(channel_attention(features, params), features)
    attended = broadcast_mul(spatial_attention(sa_input, params), sa_input)
    return add(attended, features)
