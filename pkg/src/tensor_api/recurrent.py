"""Long short-term memory over a sequence of row vectors.

Gate columns are laid out ``[input, forget, candidate, output]``, each
``hidden_size`` wide.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy

from tensor_api import ops
from tensor_api.tensor import Tensor

FORWARD = "forward"
BACKWARD = "backward"


@dataclass(frozen=True)
class LSTMWeights:
    W_x: Tensor  # d_in x 4h
    W_h: Tensor  # h x 4h
    b: Tensor  # 4h

    @property
    def hidden_size(self) -> int:
        return self.W_h.shape[0]


def _gates(z: Tensor, c_prev: Tensor, h: int) -> Tuple[Tensor, Tensor]:
    i = ops.sigmoid(z[0:h])
    f = ops.sigmoid(z[h : 2 * h])
    g = ops.tanh(z[2 * h : 3 * h])
    o = ops.sigmoid(z[3 * h : 4 * h])
    c = f * c_prev + i * g
    return o * ops.tanh(c), c


def lstm_cell(x_t: Tensor, h_prev: Tensor, c_prev: Tensor, weights: LSTMWeights) -> Tuple[Tensor, Tensor]:
    """One step of the cell; returns ``(h, c)``."""
    z = x_t @ weights.W_x + weights.b + h_prev @ weights.W_h
    return _gates(z, c_prev, weights.hidden_size)


def lstm_sequence(inputs: Tensor, weights: LSTMWeights, direction: str = FORWARD) -> Tensor:
    """Hidden states ``T x h`` from zero initial state.

    The backward direction reads the reversed sequence and re-reverses its
    outputs, so row ``t`` always belongs to input row ``t``.
    """
    steps = inputs.shape[0]
    if steps == 0:
        raise ValueError("lstm_sequence needs at least one time step")
    if direction not in (FORWARD, BACKWARD):
        raise ValueError(f"unknown direction {direction!r}")
    h_size = weights.hidden_size
    order = range(steps) if direction == FORWARD else range(steps - 1, -1, -1)

    projected = inputs @ weights.W_x + weights.b
    h = Tensor(numpy.zeros(h_size))
    c = Tensor(numpy.zeros(h_size))
    outputs = [None] * steps
    for t in order:
        z = projected[t] + h @ weights.W_h
        h, c = _gates(z, c, h_size)
        outputs[t] = h
    return ops.stack(outputs, axis=0)
