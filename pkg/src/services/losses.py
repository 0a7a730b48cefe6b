"""
Composite depth loss.

    L      = lambda * (alpha * L_depth + beta * L_grad),  lambda = 1 - SSIM(y, y_hat)
    L_depth = mean_i F(|y_i - y_hat_i|)
    L_grad  = mean over valid block positions of
              F(|dx(y) - dx(y_hat)|) + F(|dy(y) - dy(y_hat)|) + F(|ddiag(y) - ddiag(y_hat)|)
    F(x)    = ln(x + theta)

Gradients are differences of b x b block means taken one pixel apart.
Depth maps are H x W or batched N x H x W; per-image losses are averaged over
the batch, and lambda is computed per image.
"""

from dataclasses import dataclass
from typing import Union

import numpy as np

from ..interfaces.errors import DomainError, ParameterError, ShapeError
from ..models.config import AblationFlags, LossConfig
from ..tensor import (
    Tensor,
    absolute,
    add,
    block_means,
    broadcast_mul,
    crop,
    log,
    mean,
    scale,
    shift,
    ssim_index,
    sub,
)

Number = Union[float, np.ndarray]

_ROWS_COLS = (-2, -1)


@dataclass(frozen=True)
class GradientMaps:
    """Block-gradient fields of one map over the (H - b) x (W - b) valid region."""

    gx: Tensor
    gy: Tensor
    gdiag: Tensor


@dataclass(frozen=True)
class LossTerms:
    """Batch-averaged loss components; ``total`` is the differentiable objective."""

    total: Tensor
    lam: Tensor
    depth: Tensor
    grad: Tensor


def f_log(x: Number, theta: float) -> Number:
    """F(x) = ln(x + theta) for x >= 0."""
    if theta <= 0:
        raise ParameterError(f"theta must be positive, got {theta}", "loss")
    values = np.asarray(x, dtype=np.float64)
    negative = np.argwhere(np.atleast_1d(values < 0))
    if negative.size:
        raise DomainError("F is defined for nonnegative errors only", "loss", index=negative[0])
    result = np.log(values + theta)
    return float(result) if result.ndim == 0 else result


def _log_error(difference: Tensor, theta: float) -> Tensor:
    return log(shift(absolute(difference), theta))


def _check_pair(y: Tensor, yhat: Tensor) -> None:
    if y.shape != yhat.shape:
        raise ShapeError(f"ground truth {y.shape} and prediction {yhat.shape} differ", "loss")
    if y.ndim not in (2, 3):
        raise ShapeError(f"depth maps must be H x W or N x H x W, got {y.shape}", "loss")


def _depth_per_image(y: Tensor, yhat: Tensor, theta: float) -> Tensor:
    return mean(_log_error(sub(y, yhat), theta), axis=_ROWS_COLS)


def _l1_per_image(y: Tensor, yhat: Tensor) -> Tensor:
    return mean(absolute(sub(y, yhat)), axis=_ROWS_COLS)


def depth_loss(y: Tensor, yhat: Tensor, theta: float = 0.5) -> Tensor:
    """Mean of ln(|y - y_hat| + theta) over all pixels."""
    _check_pair(y, yhat)
    return mean(_depth_per_image(y, yhat, theta))


def l1_loss(y: Tensor, yhat: Tensor) -> Tensor:
    """Plain mean absolute error, the standard regression baseline."""
    _check_pair(y, yhat)
    return mean(_l1_per_image(y, yhat))


def block_gradients(img: Tensor, b: int) -> GradientMaps:
    """x, y and diagonal differences of stride-1 b x b block means."""
    if b < 1:
        raise ParameterError(f"block size must be >= 1, got {b}", "loss")
    if img.ndim < 2 or b > min(img.shape[-2:]) - 1:
        raise ShapeError(f"block size {b} leaves no valid region in a {img.shape} map", "loss")
    means = block_means(img, b)
    anchor = crop(means, (Ellipsis, slice(None, -1), slice(None, -1)))
    right = crop(means, (Ellipsis, slice(None, -1), slice(1, None)))
    below = crop(means, (Ellipsis, slice(1, None), slice(None, -1)))
    diagonal = crop(means, (Ellipsis, slice(1, None), slice(1, None)))
    return GradientMaps(gx=sub(right, anchor), gy=sub(below, anchor), gdiag=sub(diagonal, anchor))


def _grad_per_image(y: Tensor, yhat: Tensor, b: int, theta: float, diagonal: bool = True) -> Tensor:
    # block means are linear, so gradients of the difference equal differences of gradients
    maps = block_gradients(sub(y, yhat), b)
    per_position = add(_log_error(maps.gx, theta), _log_error(maps.gy, theta))
    if diagonal:
        per_position = add(per_position, _log_error(maps.gdiag, theta))
    return mean(per_position, axis=_ROWS_COLS)


def grad_loss(y: Tensor, yhat: Tensor, b: int = 2, theta: float = 0.5, diagonal: bool = True) -> Tensor:
    """Mean over valid block positions of the per-direction log errors."""
    _check_pair(y, yhat)
    return mean(_grad_per_image(y, yhat, b, theta, diagonal))


def ssim(y: Tensor, yhat: Tensor, cfg: LossConfig) -> Tensor:
    """Whole-image SSIM in [0, 1]; per image for batched maps."""
    _check_pair(y, yhat)
    return ssim_index(y, yhat, cfg.ssim_c1, cfg.ssim_c2)


def loss_terms(
    y: Tensor, yhat: Tensor, cfg: LossConfig, toggles: AblationFlags = AblationFlags()
) -> LossTerms:
    """All loss components, per image then averaged over the batch."""
    _check_pair(y, yhat)
    if toggles.l1_depth:
        depth = _l1_per_image(y, yhat)
    else:
        depth = _depth_per_image(y, yhat, cfg.theta)

    inner = scale(depth, cfg.alpha)
    if toggles.no_grad_loss:
        grad = Tensor(np.zeros(depth.shape, dtype=depth.dtype))
    else:
        grad = _grad_per_image(y, yhat, cfg.block_size, cfg.theta, diagonal=not toggles.no_diag)
        inner = add(inner, scale(grad, cfg.beta))

    if toggles.no_ssim_weight:
        lam = Tensor(np.ones(depth.shape, dtype=depth.dtype))
        weighted = inner
    else:
        lam = shift(scale(ssim(y, yhat, cfg), -1.0), 1.0)
        weighted = broadcast_mul(lam, inner)

    return LossTerms(total=mean(weighted), lam=mean(lam), depth=mean(depth), grad=mean(grad))


def total_loss(
    y: Tensor, yhat: Tensor, cfg: LossConfig, toggles: AblationFlags = AblationFlags()
) -> Tensor:
    """lambda * (alpha * L_depth + beta * L_grad) with the ablation toggles applied."""
    return loss_terms(y, yhat, cfg, toggles).total
