"""
Adam with bias correction over a named parameter registry.
"""

from typing import Dict, Tuple

import numpy as np

from ..interfaces.errors import ContractError
from ..models.training_state import AdamState
from ..tensor import GradientMap
from .network import ModelParams


def collect_gradients(params: ModelParams, grads: GradientMap) -> Dict[str, np.ndarray]:
    """Gradient per registered name; every parameter must have one."""
    missing = [name for name, tensor in params if tensor not in grads]
    if missing:
        raise ContractError(f"missing gradients for {', '.join(missing)}", "optimizer")
    return {name: grads[tensor] for name, tensor in params}


def adam_step(
    params: ModelParams,
    grads: Dict[str, np.ndarray],
    state: AdamState,
    lr: float = 1e-4,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> Tuple[ModelParams, AdamState]:
    """
    One Adam update; returns new parameters and state, inputs are left untouched.

    Raises:
        ContractError: a registered parameter has no gradient
    """
    missing = [name for name in params.names if name not in grads]
    if missing:
        raise ContractError(f"missing gradients for {', '.join(missing)}", "optimizer")

    step = state.step + 1
    correction1 = 1.0 - beta1**step
    correction2 = 1.0 - beta2**step

    updated: Dict[str, np.ndarray] = {}
    first: Dict[str, np.ndarray] = {}
    second: Dict[str, np.ndarray] = {}
    for name, tensor in params:
        g = np.asarray(grads[name], dtype=tensor.dtype)
        m_prev = state.m.get(name, np.zeros_like(tensor.data))
        v_prev = state.v.get(name, np.zeros_like(tensor.data))
        m = beta1 * m_prev + (1.0 - beta1) * g
        v = beta2 * v_prev + (1.0 - beta2) * (g * g)
        m_hat = m / correction1
        v_hat = v / correction2
        updated[name] = tensor.data - lr * m_hat / (np.sqrt(v_hat) + eps)
        first[name] = m
        second[name] = v

    return params.replace(updated), AdamState(m=first, v=second, step=step)
