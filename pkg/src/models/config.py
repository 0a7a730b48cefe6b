"""
Configuration models - immutable hyperparameter records.

Every record validates itself and raises ConfigError, so the command-line
entry point can reject bad settings before any model is constructed.
Defaults are the published training setup (lr 1e-4, batch 8, p 3, alpha 1,
beta 0.8, theta 0.5, block size 2, flip probabilities 0.3).
"""

from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Tuple

from ..interfaces.errors import ConfigError


class Command(Enum):
    """Command-line verbs."""

    TRAIN = "train"
    EVAL = "eval"
    INFER = "infer"
    SYNTH = "synth"
    GRADCHECK = "gradcheck"


@dataclass(frozen=True)
class ModelConfig:
    """
    Encoder-decoder topology.

    Each stage halves the spatial resolution; one CAMB block sits on every
    skip connection unless ``use_camb`` is False.
    The head bias starts at ``initial_depth``, half the scene depth range
    when built from the command line.
    """

    stage_channels: Tuple[int, ...] = (16, 32, 64, 128)
    input_channels: int = 3
    reduction: int = 4
    p: float = 3.0
    use_camb: bool = True
    dtype: str = "float32"
    initial_depth: float = 5.0

    @property
    def num_stages(self) -> int:
        return len(self.stage_channels)

    def validate(self) -> None:
        if len(self.stage_channels) < 2:
            raise ConfigError("model needs at least 2 stages", "config")
        if any(c < 1 for c in self.stage_channels) or self.input_channels < 1:
            raise ConfigError("channel counts must be positive", "config")
        if self.reduction < 1:
            raise ConfigError(f"reduction ratio must be positive, got {self.reduction}", "config")
        if self.use_camb:
            for c in self.stage_channels:
                if c % self.reduction:
                    raise ConfigError(
                        f"reduction ratio {self.reduction} does not divide stage width {c}", "config"
                    )
        if self.p < 1:
            raise ConfigError(f"p must be >= 1, got {self.p}", "config")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype}", "config")
        if not self.initial_depth > 0:
            raise ConfigError(f"initial depth must be positive, got {self.initial_depth}", "config")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["stage_channels"] = list(self.stage_channels)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        values = dict(data)
        values["stage_channels"] = tuple(values.get("stage_channels", cls.stage_channels))
        return cls(**values)


@dataclass(frozen=True)
class LossConfig:
    """Weights and constants of the composite depth / gradient / SSIM loss."""

    alpha: float = 1.0
    beta: float = 0.8
    theta: float = 0.5
    block_size: int = 2
    depth_range: float = 10.0
    ssim_k1: float = 0.01
    ssim_k2: float = 0.03

    @property
    def ssim_c1(self) -> float:
        return (self.ssim_k1 * self.depth_range) ** 2

    @property
    def ssim_c2(self) -> float:
        return (self.ssim_k2 * self.depth_range) ** 2

    def validate(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be nonnegative", "config")
        if self.theta <= 0:
            raise ConfigError(f"theta must be positive, got {self.theta}", "config")
        if self.block_size < 1:
            raise ConfigError(f"block size must be positive, got {self.block_size}", "config")
        if self.depth_range <= 0:
            raise ConfigError(f"depth range must be positive, got {self.depth_range}", "config")
        if self.ssim_k1 <= 0 or self.ssim_k2 <= 0:
            raise ConfigError(f"SSIM constants must be positive, got k1={self.ssim_k1} k2={self.ssim_k2}", "config")

    def check_fits(self, height: int, width: int) -> None:
        """Block gradients need a nonempty valid region: b <= min(H, W) - 1."""
        if self.block_size > min(height, width) - 1:
            raise ConfigError(
                f"block size {self.block_size} too large for {height}x{width} depth maps", "config"
            )


@dataclass(frozen=True)
class AblationFlags:
    """Component switches; all False reproduces the full method."""

    no_camb: bool = False
    no_grad_loss: bool = False
    no_diag: bool = False
    no_ssim_weight: bool = False
    l1_depth: bool = False

    def describe(self) -> str:
        active = [name for name, value in asdict(self).items() if value]
        return ", ".join(active) if active else "none"


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of one synthetic rectangles-with-depth scene."""

    seed: int = 0
    height: int = 32
    width: int = 32
    n_shapes: int = 4
    depth_max: float = 10.0

    def validate(self) -> None:
        if self.height < 16 or self.width < 16 or self.height % 16 or self.width % 16:
            raise ConfigError(
                f"scene size must be a positive multiple of 16, got {self.height}x{self.width}", "config"
            )
        if self.n_shapes < 0:
            raise ConfigError(f"n_shapes must be nonnegative, got {self.n_shapes}", "config")
        if self.depth_max <= 0:
            raise ConfigError(f"depth_max must be positive, got {self.depth_max}", "config")
        if self.seed < 0:
            raise ConfigError(f"seed must be unsigned, got {self.seed}", "config")


@dataclass(frozen=True)
class RunConfig:
    """Everything one command-line invocation needs."""

    command: Command
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    ablation: AblationFlags = field(default_factory=AblationFlags)
    scene: SceneSpec = field(default_factory=SceneSpec)
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 8
    steps: int = 300
    seed: int = 0
    zeta: float = 0.3
    eta: float = 0.3
    train_count: int = 64
    eval_count: int = 16
    count: int = 16
    data_root: Optional[str] = None
    checkpoint: Optional[str] = None
    out: Optional[str] = None
    metric_set: str = "kitti"
    min_valid_depth: float = 1e-3
    gt_as_pred: bool = False
    log_every: int = 10
    checks: Tuple[str, ...] = ()

    def validate(self) -> None:
        self.model.validate()
        self.loss.validate()
        self.scene.validate()
        self.loss.check_fits(self.scene.height, self.scene.width)
        divisor = 2 ** self.model.num_stages
        if self.scene.height % divisor or self.scene.width % divisor:
            raise ConfigError(
                f"scene size {self.scene.height}x{self.scene.width} not divisible by {divisor}", "config"
            )
        if self.lr <= 0 or self.adam_eps <= 0:
            raise ConfigError("learning rate and Adam eps must be positive", "config")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("Adam betas must lie in [0, 1)", "config")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be positive, got {self.batch_size}", "config")
        if self.steps < 0:
            raise ConfigError(f"steps must be nonnegative, got {self.steps}", "config")
        if self.seed < 0:
            raise ConfigError(f"seed must be unsigned, got {self.seed}", "config")
        if not (0 <= self.zeta <= 1 and 0 <= self.eta <= 1):
            raise ConfigError("flip probabilities must lie in [0, 1]", "config")
        if self.train_count < 1 or self.eval_count < 1 or self.count < 1:
            raise ConfigError("sample counts must be positive", "config")
        if self.metric_set not in ("kitti", "nyu"):
            raise ConfigError(f"metric set must be kitti or nyu, got {self.metric_set}", "config")
        if self.min_valid_depth <= 0:
            raise ConfigError("min valid depth must be positive", "config")
        if self.ablation.no_camb and self.model.use_camb:
            raise ConfigError("ablation no_camb requires a model built without CAMB", "config")
        if self.command is Command.EVAL and not self.checkpoint and not self.gt_as_pred:
            raise ConfigError("eval needs --checkpoint (or --gt-as-pred)", "config")
        if self.command is Command.INFER and not self.checkpoint:
            raise ConfigError("infer needs --checkpoint", "config")
        if self.command is Command.INFER and not self.data_root:
            raise ConfigError("infer needs --data-root with input images", "config")
        if self.command in (Command.SYNTH, Command.INFER) and not self.out:
            raise ConfigError(f"{self.command.value} needs --out", "config")
        if self.command is Command.TRAIN and not (self.out or self.checkpoint):
            raise ConfigError("train needs --out or --checkpoint", "config")
