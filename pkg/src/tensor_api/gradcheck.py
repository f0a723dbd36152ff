"""Central finite differences as an oracle for :meth:`GradientTape.backward`."""

from __future__ import annotations

from typing import Callable, Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy

from tensor_api.tensor import GradientTape, Tensor

Coordinates = Mapping[str, Sequence[Tuple[int, ...]]]


def finite_difference_gradient(
    f: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    eps: float = 1e-5,
    coordinates: Optional[Coordinates] = None,
) -> Dict[str, numpy.ndarray]:
    """``(f(theta + eps) - f(theta - eps)) / (2 eps)`` per coordinate.

    ``f`` reads the parameters it closes over; they are perturbed in place
    and restored. With ``coordinates`` only the listed indices are evaluated
    and every other entry of the result is NaN.

    >>> x = Tensor(3.0, requires_grad=True)
    >>> round(float(finite_difference_gradient(lambda: x * x, {"x": x})["x"]), 9)
    6.0
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    out: Dict[str, numpy.ndarray] = {}
    for name, param in params.items():
        if coordinates is None:
            grad = numpy.zeros_like(param.data)
            indices: Iterable[Tuple[int, ...]] = numpy.ndindex(*param.shape)
        else:
            grad = numpy.full_like(param.data, numpy.nan)
            indices = coordinates.get(name, ())
        for index in indices:
            index = tuple(index)
            original = param.data[index]
            param.data[index] = original + eps
            upper = float(f().data.reshape(()))
            param.data[index] = original - eps
            lower = float(f().data.reshape(()))
            param.data[index] = original
            grad[index] = (upper - lower) / (2.0 * eps)
        out[name] = grad
    return out


def sample_coordinates(
    params: Mapping[str, Tensor], per_tensor: int, rng: numpy.random.Generator
) -> Dict[str, Sequence[Tuple[int, ...]]]:
    """Pick up to ``per_tensor`` distinct random indices from each tensor."""
    picked: Dict[str, Sequence[Tuple[int, ...]]] = {}
    for name, param in params.items():
        count = min(per_tensor, param.size)
        flat = rng.choice(param.size, size=count, replace=False)
        picked[name] = [tuple(int(i) for i in numpy.unravel_index(k, param.shape)) for k in flat]
    return picked


def relative_error(analytic: numpy.ndarray, numeric: numpy.ndarray, floor: float = 1e-4) -> numpy.ndarray:
    """``|a - n| / max(|a|, |n|, floor)``; the floor keeps near-zero gradients absolute."""
    scale = numpy.maximum(numpy.maximum(numpy.abs(analytic), numpy.abs(numeric)), floor)
    return numpy.abs(analytic - numeric) / scale


def max_relative_error(
    analytic: Mapping[str, numpy.ndarray], numeric: Mapping[str, numpy.ndarray], floor: float = 1e-4
) -> float:
    worst = 0.0
    for name, num in numeric.items():
        checked = ~numpy.isnan(num)
        if not checked.any():
            continue
        err = relative_error(analytic[name][checked], num[checked], floor)
        worst = max(worst, float(err.max()))
    return worst


def check_gradients(
    f: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    eps: float = 1e-5,
    coordinates: Optional[Coordinates] = None,
) -> float:
    """Max relative error between the tape's gradient and finite differences."""
    with GradientTape() as tape:
        loss = f()
    analytic = tape.backward(loss, params)
    numeric = finite_difference_gradient(f, params, eps, coordinates)
    return max_relative_error(analytic, numeric)
