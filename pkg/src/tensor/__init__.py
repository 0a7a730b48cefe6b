"""Tensor package - dense arrays with reverse-mode automatic differentiation."""

from .gradcheck import check_gradients, grad_check
from .ops import (
    absolute,
    add,
    avgpool2,
    block_means,
    broadcast_mul,
    concat,
    conv2d,
    crop,
    dense,
    log,
    mean,
    pap_channel,
    pap_global,
    relu,
    reshape,
    scale,
    shift,
    sigmoid,
    ssim_index,
    sub,
    sum_,
    upsample_nearest,
)
from .tensor import GradientMap, Tape, Tensor, backward

__all__ = [
    "GradientMap",
    "Tape",
    "Tensor",
    "absolute",
    "add",
    "avgpool2",
    "backward",
    "block_means",
    "broadcast_mul",
    "check_gradients",
    "concat",
    "conv2d",
    "crop",
    "dense",
    "grad_check",
    "log",
    "mean",
    "pap_channel",
    "pap_global",
    "relu",
    "reshape",
    "scale",
    "shift",
    "sigmoid",
    "ssim_index",
    "sub",
    "sum_",
    "upsample_nearest",
]
