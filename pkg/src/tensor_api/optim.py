"""Adam and global-norm gradient clipping over named numpy gradients."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import numpy

from tensor_api.tensor import Tensor


@dataclass
class AdamState:
    step: int = 0
    first_moment: Dict[str, numpy.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, numpy.ndarray] = field(default_factory=dict)

    @classmethod
    def for_parameters(cls, params: Mapping[str, Tensor]) -> "AdamState":
        return cls(
            step=0,
            first_moment={name: numpy.zeros_like(p.data) for name, p in params.items()},
            second_moment={name: numpy.zeros_like(p.data) for name, p in params.items()},
        )


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, numpy.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> Tuple[Mapping[str, Tensor], AdamState]:
    """Bias-corrected Adam update, applied in place to ``params``."""
    for name, param in params.items():
        grad = grads.get(name)
        if grad is None:
            continue
        if grad.shape != param.shape:
            raise ValueError(f"Gradient for '{name}' has shape {grad.shape}, parameter has {param.shape}.")
        m = state.first_moment.setdefault(name, numpy.zeros_like(param.data))
        v = state.second_moment.setdefault(name, numpy.zeros_like(param.data))
        if m.shape != param.shape or v.shape != param.shape:
            raise ValueError(f"Optimizer state for '{name}' does not match parameter shape {param.shape}.")

    state.step += 1
    t = state.step
    correction1 = 1.0 - beta1**t
    correction2 = 1.0 - beta2**t
    for name, param in params.items():
        grad = grads.get(name)
        if grad is None:
            continue
        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        m_hat = m / correction1
        v_hat = v / correction2
        param.data -= lr * m_hat / (numpy.sqrt(v_hat) + eps)
    return params, state


def global_norm(grads: Mapping[str, numpy.ndarray]) -> float:
    return math.sqrt(sum(float(numpy.sum(g * g)) for g in grads.values()))


def clip_global_norm(grads: Mapping[str, numpy.ndarray], c: float = 5.0) -> Dict[str, numpy.ndarray]:
    """Scale all gradients by ``c / norm`` when their joint l2 norm exceeds ``c``.

    >>> clipped = clip_global_norm({"g": numpy.array([6.0, 8.0])}, 5.0)
    >>> clipped["g"]
    array([3., 4.])
    """
    if c <= 0:
        raise ValueError("clip norm must be positive")
    norm = global_norm(grads)
    if norm <= c:
        return dict(grads)
    scale = c / norm
    return {name: g * scale for name, g in grads.items()}


