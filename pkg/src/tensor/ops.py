"""
Differentiable operations of the tensor core.

Each operation is an ``Operation`` subclass plus a thin functional wrapper.
Feature maps are channel-last (H, W, C) with an optional leading batch axis;
spatial operations act on axes (-3, -2), channel operations on axis -1 and
depth-map operations (block means, SSIM) on the last two axes.
"""

from typing import Any, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..interfaces.errors import DomainError, ParameterError, ShapeError
from ..interfaces.operation import Operation
from .tensor import Tensor, active_tape

Axes = Union[int, Tuple[int, ...], None]
Grads = Tuple[Optional[np.ndarray], ...]


def apply(op: Operation, *tensors: Tensor, **kwargs: Any) -> Tensor:
    """Run ``op`` forward and record it on the active tape when gradients are needed."""
    out = np.asarray(op.forward(*(t.data for t in tensors), **kwargs))
    requires_grad = any(t.requires_grad for t in tensors)
    result = Tensor.wrap(out, requires_grad)
    tape = active_tape()
    if requires_grad and tape is not None:
        tape.record(op, tensors, result)
    return result


def _broadcast_shape(a: Tuple[int, ...], b: Tuple[int, ...], op_name: str) -> Tuple[int, ...]:
    if a == b:
        return a
    if len(a) == 0:
        return b
    if len(b) == 0:
        return a
    if len(a) != len(b):
        raise ShapeError(f"{op_name}: cannot broadcast {a} with {b}", "tensor")
    out = []
    for x, y in zip(a, b):
        if x != y and x != 1 and y != 1:
            raise ShapeError(f"{op_name}: cannot broadcast {a} with {b}", "tensor")
        out.append(max(x, y))
    return tuple(out)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    if len(shape) == 0:
        return np.asarray(grad.sum())
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    return grad.sum(axis=axes, keepdims=True)


def _normalize_axes(axis: Axes, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


# ---------------------------------------------------------------------------
# Elementwise arithmetic


class Add(Operation):
    name = "add"

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _broadcast_shape(a.shape, b.shape, self.name)
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad: np.ndarray) -> Grads:
        return _unbroadcast(grad, self.shapes[0]), _unbroadcast(grad, self.shapes[1])


class Sub(Operation):
    name = "sub"

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _broadcast_shape(a.shape, b.shape, self.name)
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad: np.ndarray) -> Grads:
        return _unbroadcast(grad, self.shapes[0]), -_unbroadcast(grad, self.shapes[1])


class BroadcastMul(Operation):
    name = "broadcast_mul"

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _broadcast_shape(a.shape, b.shape, self.name)
        self.a, self.b = a, b
        return a * b

    def backward(self, grad: np.ndarray) -> Grads:
        return (
            _unbroadcast(grad * self.b, self.a.shape),
            _unbroadcast(grad * self.a, self.b.shape),
        )


class Scale(Operation):
    name = "scale"

    def forward(self, x: np.ndarray, factor: float = 1.0) -> np.ndarray:
        self.factor = factor
        return x * factor

    def backward(self, grad: np.ndarray) -> Grads:
        return (grad * self.factor,)


class Shift(Operation):
    name = "shift"

    def forward(self, x: np.ndarray, offset: float = 0.0) -> np.ndarray:
        return x + offset

    def backward(self, grad: np.ndarray) -> Grads:
        return (grad,)


class Absolute(Operation):
    name = "abs"

    def forward(self, x: np.ndarray) -> np.ndarray:
        self.sign = np.sign(x)
        return np.abs(x)

    def backward(self, grad: np.ndarray) -> Grads:
        return (grad * self.sign,)


class Log(Operation):
    name = "log"

    def forward(self, x: np.ndarray) -> np.ndarray:
        bad = np.argwhere(np.atleast_1d(~(x > 0)))
        if bad.size:
            raise DomainError("log of a non-positive value", "tensor", index=bad[0])
        self.x = x
        return np.log(x)

    def backward(self, grad: np.ndarray) -> Grads:
        return (grad / self.x,)


class Sigmoid(Operation):
    name = "sigmoid"

    def forward(self, x: np.ndarray) -> np.ndarray:
        out = np.exp(-np.logaddexp(0.0, -x))
        info = np.finfo(out.dtype)
        # keep outputs strictly inside (0, 1) even where exp saturates
        self.out = np.clip(out, info.tiny, 1.0 - info.epsneg)
        return self.out

    def backward(self, grad: np.ndarray) -> Grads:
        return (grad * self.out * (1.0 - self.out),)


class Relu(Operation):
    name = "relu"

    def forward(self, x: np.ndarray) -> np.ndarray:
        self.mask = x > 0
        return np.where(self.mask, x, 0.0).astype(x.dtype, copy=False)

    def backward(self, grad: np.ndarray) -> Grads:
        return (grad * self.mask,)


# ---------------------------------------------------------------------------
# Reductions and shape plumbing


class Sum(Operation):
    name = "sum"

    def forward(self, x: np.ndarray, axis: Axes = None) -> np.ndarray:
        self.shape = x.shape
        self.axes = _normalize_axes(axis, x.ndim)
        return x.sum(axis=self.axes)

    def backward(self, grad: np.ndarray) -> Grads:
        return (np.broadcast_to(np.expand_dims(grad, self.axes), self.shape),)


class Mean(Sum):
    name = "mean"

    def forward(self, x: np.ndarray, axis: Axes = None) -> np.ndarray:
        total = super().forward(x, axis)
        self.count = int(np.prod([x.shape[a] for a in self.axes])) if x.ndim else 1
        return total / self.count

    def backward(self, grad: np.ndarray) -> Grads:
        return super().backward(grad / self.count)


class Reshape(Operation):
    name = "reshape"

    def forward(self, x: np.ndarray, shape: Tuple[int, ...] = ()) -> np.ndarray:
        self.shape = x.shape
        try:
            return x.reshape(shape)
        except ValueError as exc:
            raise ShapeError(f"reshape {x.shape} -> {shape}: {exc}", "tensor") from None

    def backward(self, grad: np.ndarray) -> Grads:
        return (grad.reshape(self.shape),)


class Crop(Operation):
    name = "crop"

    def forward(self, x: np.ndarray, key: Tuple[Any, ...] = ()) -> np.ndarray:
        self.shape, self.key, self.dtype = x.shape, key, x.dtype
        return x[key]

    def backward(self, grad: np.ndarray) -> Grads:
        dx = np.zeros(self.shape, dtype=np.result_type(grad, self.dtype))
        dx[self.key] = grad
        return (dx,)


class Concat(Operation):
    name = "concat"

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if a.ndim != b.ndim or a.shape[:-1] != b.shape[:-1]:
            raise ShapeError(f"concat: leading extents differ {a.shape} vs {b.shape}", "tensor")
        self.split = a.shape[-1]
        return np.concatenate([a, b], axis=-1)

    def backward(self, grad: np.ndarray) -> Grads:
        return grad[..., : self.split], grad[..., self.split :]


def _require_feature_map(x: np.ndarray, op_name: str) -> None:
    if x.ndim not in (3, 4):
        raise ShapeError(f"{op_name}: expected (H, W, C) or (N, H, W, C), got {x.shape}", "tensor")


class UpsampleNearest(Operation):
    name = "upsample_nearest"

    def forward(self, x: np.ndarray, factor: int = 2) -> np.ndarray:
        _require_feature_map(x, self.name)
        if factor < 1:
            raise ParameterError(f"upsample factor must be >= 1, got {factor}", "tensor")
        self.factor = factor
        return x.repeat(factor, axis=-3).repeat(factor, axis=-2)

    def backward(self, grad: np.ndarray) -> Grads:
        f = self.factor
        *lead, h, w, c = grad.shape
        blocks = grad.reshape(*lead, h // f, f, w // f, f, c)
        return (blocks.sum(axis=(-4, -2)),)


class AvgPool2(Operation):
    name = "avgpool2"

    def forward(self, x: np.ndarray) -> np.ndarray:
        _require_feature_map(x, self.name)
        *lead, h, w, c = x.shape
        if h % 2 or w % 2:
            raise ShapeError(f"avgpool2 needs even height and width, got {h}x{w}", "tensor")
        return x.reshape(*lead, h // 2, 2, w // 2, 2, c).mean(axis=(-4, -2))

    def backward(self, grad: np.ndarray) -> Grads:
        return (0.25 * grad.repeat(2, axis=-3).repeat(2, axis=-2),)


# ---------------------------------------------------------------------------
# Layers


class Conv2d(Operation):
    """Zero-padded 2-D convolution (cross-correlation) over channel-last maps."""

    name = "conv2d"

    def forward(
        self,
        x: np.ndarray,
        kernel: np.ndarray,
        bias: np.ndarray,
        stride: int = 1,
        padding: int = 0,
    ) -> np.ndarray:
        _require_feature_map(x, self.name)
        if kernel.ndim != 4 or kernel.shape[0] != kernel.shape[1]:
            raise ShapeError(f"conv2d: kernel must be (k, k, Cin, Cout), got {kernel.shape}", "tensor")
        k, _, cin, cout = kernel.shape
        if x.shape[-1] != cin:
            raise ShapeError(
                f"conv2d: kernel expects {cin} input channels, input has {x.shape[-1]}", "tensor"
            )
        if bias.shape != (cout,):
            raise ShapeError(f"conv2d: bias must be ({cout},), got {bias.shape}", "tensor")
        if stride < 1 or padding < 0:
            raise ParameterError(f"conv2d: stride {stride} / padding {padding} out of range", "tensor")

        self.batched = x.ndim == 4
        x4 = x if self.batched else x[None]
        n, h, w, _ = x4.shape
        if k > h + 2 * padding or k > w + 2 * padding:
            raise ShapeError(f"conv2d: kernel {k} larger than padded input {h}x{w}", "tensor")

        pad = ((0, 0), (padding, padding), (padding, padding), (0, 0))
        xp = np.pad(x4, pad)
        ho = (h + 2 * padding - k) // stride + 1
        wo = (w + 2 * padding - k) // stride + 1
        out = np.zeros((n, ho, wo, cout), dtype=np.result_type(x, kernel))
        for i in range(k):
            for j in range(k):
                out += xp[:, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride, :] @ kernel[i, j]
        out += bias

        self.xp, self.kernel = xp, kernel
        self.stride, self.padding, self.out_hw, self.in_hw = stride, padding, (ho, wo), (h, w)
        return out if self.batched else out[0]

    def backward(self, grad: np.ndarray) -> Grads:
        g4 = grad if self.batched else grad[None]
        k, _, cin, cout = self.kernel.shape
        (ho, wo), (h, w) = self.out_hw, self.in_hw
        s, p = self.stride, self.padding

        dxp = np.zeros(self.xp.shape, dtype=np.result_type(grad, self.xp))
        dkernel = np.zeros(self.kernel.shape, dtype=np.result_type(grad, self.kernel))
        flat_grad = g4.reshape(-1, cout)
        for i in range(k):
            for j in range(k):
                window = (slice(None), slice(i, i + s * (ho - 1) + 1, s), slice(j, j + s * (wo - 1) + 1, s), slice(None))
                dkernel[i, j] = self.xp[window].reshape(-1, cin).T @ flat_grad
                dxp[window] += g4 @ self.kernel[i, j].T
        dbias = flat_grad.sum(axis=0)
        dx = dxp[:, p : p + h, p : p + w, :]
        return (dx if self.batched else dx[0]), dkernel, dbias


class Dense(Operation):
    """Fully connected layer over the last axis."""

    name = "dense"

    def forward(self, x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
        if weights.ndim != 2 or x.ndim < 1 or x.shape[-1] != weights.shape[0]:
            raise ShapeError(f"dense: input {x.shape} does not match weights {weights.shape}", "tensor")
        if bias.shape != (weights.shape[1],):
            raise ShapeError(f"dense: bias must be ({weights.shape[1]},), got {bias.shape}", "tensor")
        self.x, self.weights = x, weights
        return x @ weights + bias

    def backward(self, grad: np.ndarray) -> Grads:
        n, m = self.weights.shape
        flat_grad = grad.reshape(-1, m)
        dweights = self.x.reshape(-1, n).T @ flat_grad
        return grad @ self.weights.T, dweights, flat_grad.sum(axis=0)


class PowerAveragePool(Operation):
    """
    Power-average pooling (sum_i x_i^p)^(1/p) over a reduction set.

    p = 1 is sum pooling and p -> inf approaches max pooling. Inputs must be
    nonnegative. An all-zero reduction set pools to 0 with gradient 0.
    """

    name = "pap"

    def forward(self, x: np.ndarray, p: float = 3.0, axis: Tuple[int, ...] = (-1,)) -> np.ndarray:
        if p < 1:
            raise ParameterError(f"power-average pooling needs p >= 1, got {p}", "tensor")
        negative = np.argwhere(np.atleast_1d(x < 0))
        if negative.size:
            raise DomainError("power-average pooling of a negative value", "tensor", index=negative[0])
        if p == 1:
            out = x.sum(axis=axis, keepdims=True)
        else:
            # scale by the per-set maximum so x**p cannot overflow
            peak = x.max(axis=axis, keepdims=True)
            safe_peak = np.where(peak > 0, peak, 1.0)
            out = safe_peak * np.sum((x / safe_peak) ** p, axis=axis, keepdims=True) ** (1.0 / p)
            out = np.where(peak > 0, out, 0.0)
        self.x, self.out, self.p = x, out, p
        return out

    def backward(self, grad: np.ndarray) -> Grads:
        positive = self.out > 0
        safe_out = np.where(positive, self.out, 1.0)
        local = np.where(positive, (self.x / safe_out) ** (self.p - 1), 0.0)
        return (grad * local,)


class BlockMeans(Operation):
    """Stride-1 sliding b x b window means over the last two axes."""

    name = "block_means"

    def forward(self, x: np.ndarray, b: int = 2) -> np.ndarray:
        if b < 1:
            raise ParameterError(f"block size must be >= 1, got {b}", "loss")
        if x.ndim < 2 or b > x.shape[-2] or b > x.shape[-1]:
            raise ShapeError(f"block size {b} does not fit map of shape {x.shape}", "loss")
        self.shape, self.b = x.shape, b
        return sliding_window_view(x, (b, b), axis=(-2, -1)).mean(axis=(-2, -1))

    def backward(self, grad: np.ndarray) -> Grads:
        b = self.b
        ho, wo = grad.shape[-2:]
        dx = np.zeros(self.shape, dtype=grad.dtype)
        for i in range(b):
            for j in range(b):
                dx[..., i : i + ho, j : j + wo] += grad
        return (dx / (b * b),)


class Ssim(Operation):
    """
    Whole-image structural similarity over the last two axes, clamped to [0, 1].

    Statistics are population moments of each map. Gradients flow where the
    raw index already lies in [0, 1] and are zero where the clamp is active.
    """

    name = "ssim"

    def forward(self, a: np.ndarray, b: np.ndarray, c1: float = 1e-4, c2: float = 9e-4) -> np.ndarray:
        if a.shape != b.shape or a.ndim < 2:
            raise ShapeError(f"ssim: shapes {a.shape} and {b.shape} differ", "loss")
        axes = (-2, -1)
        mu_a = a.mean(axis=axes, keepdims=True)
        mu_b = b.mean(axis=axes, keepdims=True)
        da, db = a - mu_a, b - mu_b
        var_a = (da * da).mean(axis=axes, keepdims=True)
        var_b = (db * db).mean(axis=axes, keepdims=True)
        cov = (da * db).mean(axis=axes, keepdims=True)

        num1, num2 = 2 * mu_a * mu_b + c1, 2 * cov + c2
        den1, den2 = mu_a**2 + mu_b**2 + c1, var_a + var_b + c2
        raw = (num1 * num2) / (den1 * den2)

        self.stats = (mu_a, mu_b, da, db, num1, num2, den1, den2, raw)
        self.count = a.shape[-1] * a.shape[-2]
        return np.clip(raw, 0.0, 1.0)[..., 0, 0]

    def backward(self, grad: np.ndarray) -> Grads:
        mu_a, mu_b, da, db, num1, num2, den1, den2, raw = self.stats
        n = self.count
        g = np.asarray(grad)[..., None, None] * ((raw >= 0) & (raw <= 1))
        den = den1 * den2

        def partial(mu_self, mu_other, d_self, d_other):
            dnum1 = 2 * mu_other / n
            dnum2 = 2 * d_other / n
            dden1 = 2 * mu_self / n
            dden2 = 2 * d_self / n
            return (dnum1 * num2 + num1 * dnum2) / den - raw * (dden1 / den1 + dden2 / den2)

        return g * partial(mu_a, mu_b, da, db), g * partial(mu_b, mu_a, db, da)


# ---------------------------------------------------------------------------
# Functional API


def add(a: Tensor, b: Tensor) -> Tensor:
    return apply(Add(), a, b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return apply(Sub(), a, b)


def broadcast_mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product; one operand may have extent 1 on mismatched axes."""
    return apply(BroadcastMul(), a, b)


def scale(x: Tensor, factor: float) -> Tensor:
    return apply(Scale(), x, factor=float(factor))


def shift(x: Tensor, offset: float) -> Tensor:
    return apply(Shift(), x, offset=float(offset))


def absolute(x: Tensor) -> Tensor:
    return apply(Absolute(), x)


def log(x: Tensor) -> Tensor:
    return apply(Log(), x)


def sigmoid(x: Tensor) -> Tensor:
    return apply(Sigmoid(), x)


def relu(x: Tensor) -> Tensor:
    return apply(Relu(), x)


def sum_(x: Tensor, axis: Axes = None) -> Tensor:
    return apply(Sum(), x, axis=axis)


def mean(x: Tensor, axis: Axes = None) -> Tensor:
    return apply(Mean(), x, axis=axis)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    return apply(Reshape(), x, shape=tuple(shape))


def crop(x: Tensor, key: Tuple[Any, ...]) -> Tensor:
    """Basic-slice ``x[key]``; gradients scatter back into the cropped region."""
    return apply(Crop(), x, key=key)


def concat(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate along the channel (last) axis."""
    return apply(Concat(), a, b)


def upsample_nearest(x: Tensor, factor: int = 2) -> Tensor:
    return apply(UpsampleNearest(), x, factor=factor)


def avgpool2(x: Tensor) -> Tensor:
    return apply(AvgPool2(), x)


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    return apply(Conv2d(), x, kernel, bias, stride=stride, padding=padding)


def dense(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    return apply(Dense(), x, weights, bias)


def pap_global(x: Tensor, p: float) -> Tensor:
    """Power-average pooling over each channel's spatial positions -> (1, 1, C)."""
    if x.ndim not in (3, 4):
        raise ShapeError(f"pap_global: expected a feature map, got {x.shape}", "tensor")
    return apply(PowerAveragePool(), x, p=float(p), axis=(x.ndim - 3, x.ndim - 2))


def pap_channel(x: Tensor, p: float) -> Tensor:
    """Power-average pooling over the channels at each position -> (H, W, 1)."""
    if x.ndim not in (3, 4):
        raise ShapeError(f"pap_channel: expected a feature map, got {x.shape}", "tensor")
    return apply(PowerAveragePool(), x, p=float(p), axis=(x.ndim - 1,))


def block_means(x: Tensor, b: int) -> Tensor:
    return apply(BlockMeans(), x, b=int(b))


def ssim_index(a: Tensor, b: Tensor, c1: float, c2: float) -> Tensor:
    return apply(Ssim(), a, b, c1=float(c1), c2=float(c2))
