"""Primitive differentiable operations on :class:`~tensor_api.tensor.Tensor`.

Every function computes its result with numpy and registers a backward
closure on the active tape when one of its inputs is tracked. Python
scalars and numpy arrays are accepted wherever a tensor is expected and are
treated as constants.

Masks are additive: 0 keeps an entry and :data:`MASK_VALUE` removes it.

>>> import numpy
>>> softmax_rows(Tensor([[0.0, 0.0]])).data
array([[0.5, 0.5]])
>>> softmax_rows(Tensor([[5.0, 7.0]]), numpy.array([[0.0, MASK_VALUE]])).data
array([[1., 0.]])

"""

from __future__ import annotations

import builtins
from typing import Optional, Sequence, Tuple

import numpy

from tensor_api.tensor import MaskError, NumericError, Tensor, active_tape, as_tensor

MASK_VALUE = -1e9


def _apply(data: numpy.ndarray, inputs: Tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    tape = active_tape()
    if tape is not None and builtins.any(tape.tracks(t) for t in inputs):
        tape.record(out, inputs, backward)
    return out


def unbroadcast(grad: numpy.ndarray, shape: Tuple[int, ...]) -> numpy.ndarray:
    """Sum ``grad`` over the axes numpy broadcasting added to reach ``shape``."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


# -- elementwise arithmetic ------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _apply(
        a.data + b.data,
        (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _apply(
        a.data - b.data,
        (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _apply(
        a.data * b.data,
        (a, b),
        lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)),
    )


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _apply(-a.data, (a,), lambda g: (-g,))


def minimum(a, b) -> Tensor:
    """Elementwise minimum; at ties the gradient goes to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.data <= b.data
    return _apply(
        numpy.minimum(a.data, b.data),
        (a, b),
        lambda g: (unbroadcast(g * take_a, a.shape), unbroadcast(g * ~take_a, b.shape)),
    )


# -- nonlinearities -------------------------------------------------------


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = numpy.exp(a.data)
    return _apply(out, (a,), lambda g: (g * out,))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = numpy.tanh(a.data)
    return _apply(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    # exp(-|x|) never overflows
    e = numpy.exp(-numpy.abs(a.data))
    out = numpy.where(a.data >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _apply(out, (a,), lambda g: (g * out * (1.0 - out),))


def relu(a) -> Tensor:
    a = as_tensor(a)
    active = a.data > 0
    return _apply(a.data * active, (a,), lambda g: (g * active,))


def log_clamped(a, floor: float = 1e-12) -> Tuple[Tensor, int]:
    """Natural log of ``max(a, floor)`` and the number of clamped entries."""
    a = as_tensor(a)
    clamped = a.data < floor
    safe = numpy.where(clamped, floor, a.data)
    out = _apply(numpy.log(safe), (a,), lambda g: (numpy.where(clamped, 0.0, g / safe),))
    return out, int(clamped.sum())


# -- linear algebra and shape ---------------------------------------------


def matmul(a, b) -> Tensor:
    """``a @ b`` for ``a`` of rank >= 1 and a matrix ``b``."""
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim != 2:
        raise ValueError(f"matmul expects a matrix on the right, got shape {b.shape}")

    def backward(g):
        grad_a = g @ b.data.T
        a2 = a.data.reshape(-1, a.shape[-1])
        g2 = g.reshape(-1, b.shape[1])
        return grad_a, a2.T @ g2

    return _apply(a.data @ b.data, (a, b), backward)


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _apply(a.data.T.copy(), (a,), lambda g: (g.T,))


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    return _apply(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def sum(a, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)

    def backward(g):
        if axis is not None and not keepdims:
            g = numpy.expand_dims(g, axis)
        return (numpy.broadcast_to(g, a.shape).copy(),)

    return _apply(numpy.sum(a.data, axis=axis, keepdims=keepdims), (a,), backward)


def getitem(a, key) -> Tensor:
    """Indexing with slices or integer arrays; repeated indices accumulate."""
    a = as_tensor(a)

    def backward(g):
        grad = numpy.zeros_like(a.data)
        numpy.add.at(grad, key, g)
        return (grad,)

    return _apply(numpy.array(a.data[key], dtype=numpy.float64), (a,), backward)


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    axis_ = axis % tensors[0].ndim
    bounds = numpy.cumsum([t.shape[axis_] for t in tensors])[:-1]
    return _apply(
        numpy.concatenate([t.data for t in tensors], axis=axis_),
        tensors,
        lambda g: tuple(numpy.split(g, bounds, axis=axis_)),
    )


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    return _apply(
        numpy.stack([t.data for t in tensors], axis=axis),
        tensors,
        lambda g: tuple(numpy.take(g, i, axis=axis) for i in range(len(tensors))),
    )


def max_along(a, axis: int) -> Tensor:
    """Maximum over ``axis``; the first maximal entry receives the gradient."""
    a = as_tensor(a)
    index = numpy.expand_dims(numpy.argmax(a.data, axis=axis), axis)
    out = numpy.take_along_axis(a.data, index, axis=axis).squeeze(axis)

    def backward(g):
        grad = numpy.zeros_like(a.data)
        numpy.put_along_axis(grad, index, numpy.expand_dims(g, axis), axis=axis)
        return (grad,)

    return _apply(out, (a,), backward)


def pad_columns(a, extra: int) -> Tensor:
    """Append ``extra`` zero columns on the last axis."""
    a = as_tensor(a)
    if extra == 0:
        return a
    zeros = Tensor(numpy.zeros(a.shape[:-1] + (extra,)))
    return concat([a, zeros], axis=-1)


# -- normalisation --------------------------------------------------------


def softmax_rows(x, mask: Optional[numpy.ndarray] = None) -> Tensor:
    """Softmax over the last axis with an optional additive mask.

    Masked entries come out as exactly 0. A row whose entries are all masked
    raises :class:`MaskError`.

    >>> import math
    >>> softmax_rows(Tensor([[0.0, math.log(3.0)]])).data.round(12)
    array([[0.25, 0.75]])
    """
    x = as_tensor(x)
    if not numpy.isfinite(x.data).all():
        raise NumericError("softmax_rows received non-finite logits")
    logits = x.data
    masked = None
    if mask is not None:
        mask = numpy.asarray(mask, dtype=numpy.float64)
        masked = numpy.broadcast_to(mask <= MASK_VALUE / 2, logits.shape)
        if masked.all(axis=-1).any():
            raise MaskError("softmax row is fully masked")
        logits = logits + mask
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = numpy.exp(shifted)
    if masked is not None:
        e = numpy.where(masked, 0.0, e)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return _apply(out, (x,), backward)


def layer_normalize(x, gain, bias, eps: float = 1e-6) -> Tensor:
    """Normalise each feature vector (last axis), then apply ``gain`` and ``bias``."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    mean = x.data.mean(axis=-1, keepdims=True)
    centred = x.data - mean
    inv_std = 1.0 / numpy.sqrt((centred * centred).mean(axis=-1, keepdims=True) + eps)
    xhat = centred * inv_std
    d = x.shape[-1]

    def backward(g):
        gxhat = g * gain.data
        grad_x = inv_std * (
            gxhat
            - gxhat.mean(axis=-1, keepdims=True)
            - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True)
        )
        grad_gain = unbroadcast((g * xhat).reshape(-1, d).sum(axis=0), gain.shape)
        grad_bias = unbroadcast(g.reshape(-1, d).sum(axis=0), bias.shape)
        return grad_x, grad_gain, grad_bias

    return _apply(xhat * gain.data + bias.data, (x, gain, bias), backward)


def dropout(x, keep: float, rng: Optional[numpy.random.Generator], training: bool) -> Tensor:
    """Inverted dropout: scale kept units by ``1/keep`` while training."""
    x = as_tensor(x)
    if not training or keep >= 1.0:
        return x
    if rng is None:
        raise ValueError("dropout needs a random generator while training")
    keep_mask = (rng.random(x.shape) < keep) / keep
    return mul(x, Tensor(keep_mask))
