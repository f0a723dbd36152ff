"""Dense float64 tensors recorded on a gradient tape.

A :class:`Tensor` wraps a C-contiguous ``numpy.float64`` array. Operations
from :mod:`tensor_api.ops` compute their result with numpy and, while a
:class:`GradientTape` is active and at least one input is tracked, append a
record holding the inputs, the output and a closure that maps the output
gradient to input gradients. :meth:`GradientTape.backward` then walks the
records in reverse order.

Leaf parameters are tensors created with ``requires_grad=True``. Constants
(masks, one-hot matrices, dropout masks) are plain tensors and never receive
gradients.

>>> x = Tensor(3.0, requires_grad=True)
>>> with GradientTape() as tape:
...     y = x * x
>>> float(tape.backward(y, {"x": x})["x"])
6.0

"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy


class TapeError(RuntimeError):
    """Misuse of a gradient tape."""


class NumericError(ArithmeticError):
    """Non-finite values where finite ones are required."""


class MaskError(ValueError):
    """An additive mask leaves a row without any attendable position."""


_local = threading.local()


def _tape_stack() -> List["GradientTape"]:
    stack = getattr(_local, "tapes", None)
    if stack is None:
        stack = []
        _local.tapes = stack
    return stack


def active_tape() -> Optional["GradientTape"]:
    """Return the innermost tape opened by this thread, if any."""
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """n-dimensional array of 64-bit floats with an optional graph handle."""

    __slots__ = ("data", "requires_grad", "node", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = numpy.asarray(data, dtype=numpy.float64)
        self.requires_grad = requires_grad
        # (tape, record index) once produced on a tape
        self.node: Optional[Tuple["GradientTape", int]] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> numpy.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"

    def __len__(self) -> int:
        return self.data.shape[0]

    # operators delegate to tensor_api.ops
    def __add__(self, other):
        return _ops.add(self, other)

    def __radd__(self, other):
        return _ops.add(other, self)

    def __sub__(self, other):
        return _ops.sub(self, other)

    def __rsub__(self, other):
        return _ops.sub(other, self)

    def __mul__(self, other):
        return _ops.mul(self, other)

    def __rmul__(self, other):
        return _ops.mul(other, self)

    def __neg__(self):
        return _ops.neg(self)

    def __matmul__(self, other):
        return _ops.matmul(self, other)

    def __getitem__(self, key):
        return _ops.getitem(self, key)

    @property
    def T(self) -> "Tensor":
        return _ops.transpose(self)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return _ops.sum(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return _ops.reshape(self, shape)


BackwardFn = Callable[[numpy.ndarray], Sequence[Optional[numpy.ndarray]]]


@dataclass
class _Record:
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class GradientTape:
    """Ordered record of primitive operations for one forward pass.

    A tape is owned by the thread that opened it. It supports a single
    :meth:`backward`; call :meth:`reset` before recording again.
    """

    def __init__(self):
        self._records: List[_Record] = []
        self._consumed = False

    def __enter__(self) -> "GradientTape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()

    def __len__(self) -> int:
        return len(self._records)

    def tracks(self, tensor: Tensor) -> bool:
        if tensor.requires_grad:
            return True
        return tensor.node is not None and tensor.node[0] is self

    def record(self, output: Tensor, inputs: Tuple[Tensor, ...], backward: BackwardFn) -> None:
        if self._consumed:
            raise TapeError("Tape already consumed; reset() it before recording again.")
        output.node = (self, len(self._records))
        self._records.append(_Record(inputs, output, backward))

    def reset(self) -> None:
        for rec in self._records:
            rec.output.node = None
        self._records = []
        self._consumed = False

    def backward(self, loss: Tensor, params: Mapping[str, Tensor]) -> Dict[str, numpy.ndarray]:
        """Return d(loss)/d(param) for every named parameter.

        Parameters the loss does not depend on get zero gradients. Several
        names may refer to one tensor; each name then gets the same array.
        """
        if not self._records:
            raise TapeError("No recorded forward pass on this tape.")
        if self._consumed:
            raise TapeError("Tape already consumed; reset() it before another backward pass.")
        if loss.size != 1:
            raise TapeError(f"Loss must be a scalar, got shape {loss.shape}.")
        if loss.node is None or loss.node[0] is not self:
            raise TapeError("Loss was not produced on this tape.")

        grads: Dict[int, numpy.ndarray] = {id(loss): numpy.ones_like(loss.data)}
        for rec in reversed(self._records[: loss.node[1] + 1]):
            grad = grads.pop(id(rec.output), None)
            if grad is None:
                continue
            for tensor, input_grad in zip(rec.inputs, rec.backward(grad)):
                if input_grad is None or not self.tracks(tensor):
                    continue
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + input_grad
                else:
                    grads[key] = input_grad
        self._consumed = True

        out: Dict[str, numpy.ndarray] = {}
        for name, param in params.items():
            grad = grads.get(id(param))
            if grad is None:
                out[name] = numpy.zeros_like(param.data)
            else:
                out[name] = numpy.array(grad, dtype=numpy.float64).reshape(param.shape)
        return out


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


from tensor_api import ops as _ops  # noqa: E402
