from tensor_api.tensor import GradientTape, MaskError, NumericError, TapeError, Tensor, active_tape
from tensor_api.ops import MASK_VALUE, layer_normalize, softmax_rows
from tensor_api.init import fan_avg_init
from tensor_api.recurrent import LSTMWeights, lstm_cell, lstm_sequence
from tensor_api.optim import AdamState, adam_step, clip_global_norm, global_norm
from tensor_api.gradcheck import check_gradients, finite_difference_gradient, max_relative_error

__all__ = [
    "AdamState",
    "GradientTape",
    "LSTMWeights",
    "MASK_VALUE",
    "MaskError",
    "NumericError",
    "TapeError",
    "Tensor",
    "active_tape",
    "adam_step",
    "check_gradients",
    "clip_global_norm",
    "fan_avg_init",
    "finite_difference_gradient",
    "global_norm",
    "layer_normalize",
    "lstm_cell",
    "lstm_sequence",
    "max_relative_error",
    "softmax_rows",
]
