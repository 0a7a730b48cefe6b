"""
Finite-difference verification of the autodiff engine.
"""

from typing import Callable, List, Optional, Sequence

import numpy as np

from ..interfaces.errors import ContractError, ParameterError
from .tensor import Tape, Tensor, backward


def _relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return np.abs(analytic - numeric) / scale


def check_gradients(
    f: Callable[[Sequence[Tensor]], Tensor],
    inputs: Sequence[Tensor],
    eps: float = 1e-6,
    max_entries: Optional[int] = None,
    seed: int = 0,
) -> List[float]:
    """
    Compare autodiff against central differences for several inputs at once.

    All inputs are promoted to 64-bit. When ``max_entries`` is set, at most that
    many seeded-random coordinates of each input are perturbed.

    Returns:
        worst relative error per input, denominator max(|a|, |b|, 1e-8)
    """
    if eps <= 0:
        raise ParameterError(f"eps must be positive, got {eps}", "gradcheck")
    base = [Tensor(t.data.astype(np.float64), requires_grad=True) for t in inputs]

    with Tape() as tape:
        out = f(base)
    if out.size != 1:
        raise ContractError(f"checked function must be scalar, got shape {out.shape}", "gradcheck")
    grads = backward(out, tape)

    rng = np.random.default_rng(seed)
    worst: List[float] = []
    for position, tensor in enumerate(base):
        analytic = grads.get(tensor)
        indices = list(np.ndindex(*tensor.shape))
        if max_entries is not None and len(indices) > max_entries:
            chosen = rng.choice(len(indices), size=max_entries, replace=False)
            indices = [indices[i] for i in sorted(chosen)]

        numeric = np.zeros(len(indices))
        picked = np.zeros(len(indices))
        for k, index in enumerate(indices):
            values = []
            for sign in (1.0, -1.0):
                data = tensor.numpy()
                data[index] += sign * eps
                probe = list(base)
                probe[position] = Tensor(data)
                values.append(f(probe).item())
            numeric[k] = (values[0] - values[1]) / (2 * eps)
            picked[k] = analytic[index]
        worst.append(float(_relative_error(picked, numeric).max()) if indices else 0.0)
    return worst


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-6) -> float:
    """Worst relative error between autodiff and central differences of scalar ``f`` at ``x``."""
    return check_gradients(lambda ts: f(ts[0]), [x], eps=eps)[0]
