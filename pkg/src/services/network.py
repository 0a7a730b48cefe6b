"""
Encoder-decoder depth network with CAMB-equipped skip connections.

Encoder stage s:  skip_s = relu(conv3x3(x)),  x = avgpool2(skip_s)
Decoder stage s (deepest first):
                  x = relu(conv3x3(concat(upsample2(x), camb_s(skip_s))))
Head:             depth = relu(conv1x1(x)) with one channel
"""

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Tuple

import numpy as np

from ..interfaces.errors import ShapeError
from ..models.config import ModelConfig
from ..tensor import Tensor, avgpool2, concat, conv2d, relu, upsample_nearest
from ..utils.logger import get_logger
from .camb import CambParams, camb_forward, glorot_uniform, init_camb_params

logger = get_logger(__name__)


@dataclass(frozen=True)
class ModelParams:
    """
    Flat named-parameter registry plus the topology it was built for.

    Registry order is deterministic: encoder stages, CAMB blocks, decoder
    stages (deepest first), head.
    """

    config: ModelConfig
    registry: Dict[str, Tensor] = field(default_factory=dict)

    def __iter__(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(self.registry.items())

    def __getitem__(self, name: str) -> Tensor:
        return self.registry[name]

    @property
    def names(self) -> List[str]:
        return list(self.registry)

    def count(self, prefix: str = "") -> int:
        """Number of scalar parameters whose name starts with ``prefix``."""
        return sum(t.size for name, t in self.registry.items() if name.startswith(prefix))

    def camb(self, stage: int) -> CambParams:
        return CambParams.from_registry(
            self.registry, f"camb.{stage}", self.config.p, self.config.reduction
        )

    def replace(self, arrays: Dict[str, np.ndarray]) -> "ModelParams":
        """New registry with the given arrays, same names and order."""
        registry = {
            name: Tensor(arrays[name], requires_grad=True, name=name, dtype=self.config.dtype)
            for name in self.registry
        }
        return ModelParams(self.config, registry)

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: t.data for name, t in self.registry.items()}


def init_params(config: ModelConfig, seed: int = 0) -> ModelParams:
    """Seeded Glorot-uniform kernels, zero biases, head bias at ``config.initial_depth``."""
    config.validate()
    rng = np.random.default_rng(seed)
    arrays: Dict[str, np.ndarray] = {}

    def conv_layer(prefix: str, k: int, cin: int, cout: int) -> None:
        arrays[f"{prefix}.kernel"] = glorot_uniform(rng, (k, k, cin, cout), k * k * cin, k * k * cout)
        arrays[f"{prefix}.bias"] = np.zeros(cout)

    channels = config.stage_channels
    previous = config.input_channels
    for s, width in enumerate(channels):
        conv_layer(f"encoder.{s}", 3, previous, width)
        previous = width

    if config.use_camb:
        for s, width in enumerate(channels):
            block = init_camb_params(width, rng, config.p, config.reduction)
            for name, tensor in block.named_tensors():
                arrays[f"camb.{s}.{name}"] = tensor.numpy()

    incoming = channels[-1]
    for s in reversed(range(len(channels))):
        conv_layer(f"decoder.{s}", 3, incoming + channels[s], channels[s])
        incoming = channels[s]
    conv_layer("head", 1, channels[0], 1)
    arrays["head.bias"] = np.full(1, config.initial_depth)

    registry = {
        name: Tensor(value, requires_grad=True, name=name, dtype=config.dtype)
        for name, value in arrays.items()
    }
    params = ModelParams(config, registry)
    logger.debug(f"Initialized {len(registry)} tensors, {params.count()} parameters (seed {seed})")
    return params


def encoder_forward(image: Tensor, params: ModelParams) -> Tuple[Tensor, List[Tensor]]:
    """Return the bottleneck and the pre-pool activation of every stage."""
    config = params.config
    divisor = 2 ** config.num_stages
    height, width = image.shape[-3], image.shape[-2]
    if height % divisor or width % divisor:
        raise ShapeError(
            f"image {height}x{width} not divisible by 2^{config.num_stages} = {divisor}", "network"
        )
    x = image
    skips: List[Tensor] = []
    for s in range(config.num_stages):
        x = relu(conv2d(x, params[f"encoder.{s}.kernel"], params[f"encoder.{s}.bias"], padding=1))
        skips.append(x)
        x = avgpool2(x)
    return x, skips


def decoder_forward(bottleneck: Tensor, skips: List[Tensor], params: ModelParams) -> Tensor:
    """Upsample, merge attended skips, convolve; returns a nonnegative H x W x 1 depth map."""
    config = params.config
    if len(skips) != config.num_stages:
        raise ShapeError(f"expected {config.num_stages} skips, got {len(skips)}", "network")
    x = bottleneck
    for s in reversed(range(config.num_stages)):
        skip = skips[s]
        up = upsample_nearest(x, 2)
        if up.shape[:-1] != skip.shape[:-1]:
            raise ShapeError(f"decoder stage {s}: upsampled {up.shape} vs skip {skip.shape}", "network")
        attended = camb_forward(skip, params.camb(s)) if config.use_camb else skip
        merged = concat(up, attended)
        x = relu(conv2d(merged, params[f"decoder.{s}.kernel"], params[f"decoder.{s}.bias"], padding=1))
    return relu(conv2d(x, params["head.kernel"], params["head.bias"]))


def model_forward(image: Tensor, params: ModelParams) -> Tensor:
    """Image (H x W x 3, optionally batched) to depth prediction (H x W x 1)."""
    bottleneck, skips = encoder_forward(image, params)
    return decoder_forward(bottleneck, skips, params)
