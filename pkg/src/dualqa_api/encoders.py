"""Sequence encoders: feed-forward, stacked LSTM and self-attention blocks.

Each block is layer-normalised and the encoder output concatenates the
block outputs along features. The context encoder runs a bidirectional LSTM
without a mask; question and answer encoders run forward-only under a causal
mask so that row ``t`` never sees tokens after ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy

from tensor_api import ops
from tensor_api.init import fan_avg_init
from tensor_api.ops import MASK_VALUE
from tensor_api.recurrent import BACKWARD, FORWARD, LSTMWeights, lstm_sequence
from tensor_api.tensor import Tensor

from dualqa_api.config import ModelConfig
from dualqa_api.registry import ParameterRegistry


@dataclass(frozen=True)
class EncoderConfig:
    d_model: int
    lstm_layers: int
    heads: int
    bidirectional: bool
    causal: bool
    d_attn: int
    d_ff: int
    use_lstm: bool = True
    use_selfattn: bool = True
    keep: float = 1.0

    def __post_init__(self):
        if self.d_model % self.heads or self.d_attn % self.heads:
            raise ValueError(f"d_model={self.d_model} and d_attn={self.d_attn} must be divisible by {self.heads} heads")
        if self.causal and self.bidirectional:
            raise ValueError("a causal encoder cannot be bidirectional")
        if self.bidirectional and self.use_lstm and self.d_model % 2:
            raise ValueError("a bidirectional encoder needs an even d_model")
        if not (self.use_lstm or self.use_selfattn):
            raise ValueError("an encoder needs the LSTM or the self-attention block")

    @classmethod
    def for_context(cls, config: ModelConfig) -> "EncoderConfig":
        return cls(
            d_model=config.d_model,
            lstm_layers=config.lstm_layers,
            heads=config.context_heads,
            bidirectional=True,
            causal=False,
            d_attn=config.attn_width,
            d_ff=config.ff_width,
            use_lstm=not config.encoder_no_lstm,
            use_selfattn=not config.encoder_no_selfattn,
            keep=config.keep,
        )

    @classmethod
    def for_sequence(cls, config: ModelConfig) -> "EncoderConfig":
        return cls(
            d_model=config.d_model,
            lstm_layers=config.lstm_layers,
            heads=config.sequence_heads,
            bidirectional=False,
            causal=True,
            d_attn=config.attn_width,
            d_ff=config.ff_width,
            use_lstm=not config.encoder_no_lstm,
            use_selfattn=not config.encoder_no_selfattn,
            keep=config.keep,
        )

    @property
    def directions(self):
        return (FORWARD, BACKWARD) if self.bidirectional else (FORWARD,)

    @property
    def hidden_size(self) -> int:
        return self.d_model // len(self.directions)

    @property
    def d_enc(self) -> int:
        return self.d_model * (1 + int(self.use_lstm) + int(self.use_selfattn))


def register_encoder(
    registry: ParameterRegistry, prefix: str, cfg: EncoderConfig, d_in: int, rng: numpy.random.Generator
) -> None:
    d = cfg.d_model
    registry.register(f"{prefix}/ffn/W_in", fan_avg_init((d_in, cfg.d_ff), rng))
    registry.register(f"{prefix}/ffn/b_in", numpy.zeros(cfg.d_ff))
    registry.register(f"{prefix}/ffn/W_out", fan_avg_init((cfg.d_ff, d), rng))
    registry.register(f"{prefix}/ffn/b_out", numpy.zeros(d))
    registry.register(f"{prefix}/ffn/gain", numpy.ones(d))
    registry.register(f"{prefix}/ffn/bias", numpy.zeros(d))
    if cfg.use_lstm:
        h = cfg.hidden_size
        for layer in range(cfg.lstm_layers):
            for direction in cfg.directions:
                stem = f"{prefix}/lstm/layer{layer}/{direction}"
                registry.register(f"{stem}/W_x", fan_avg_init((d, 4 * h), rng))
                registry.register(f"{stem}/W_h", fan_avg_init((h, 4 * h), rng))
                bias = numpy.zeros(4 * h)
                bias[h : 2 * h] = 1.0  # forget gate
                registry.register(f"{stem}/b", bias)
        registry.register(f"{prefix}/lstm/gain", numpy.ones(d))
        registry.register(f"{prefix}/lstm/bias", numpy.zeros(d))
    if cfg.use_selfattn:
        registry.register(f"{prefix}/selfattn/R", fan_avg_init((d, cfg.d_attn), rng))
        registry.register(f"{prefix}/selfattn/gain", numpy.ones(d))
        registry.register(f"{prefix}/selfattn/bias", numpy.zeros(d))


def causal_mask(length: int) -> numpy.ndarray:
    """Additive mask letting row ``i`` attend to columns ``j <= i``.

    >>> (causal_mask(3) == 0).astype(int).tolist()
    [[1, 0, 0], [1, 1, 0], [1, 1, 1]]
    """
    if length < 1:
        raise ValueError("causal_mask needs a positive length")
    return numpy.triu(numpy.full((length, length), MASK_VALUE), k=1)


def self_attention(X: Tensor, R: Tensor, mask: Optional[numpy.ndarray] = None, heads: int = 1) -> Tensor:
    """Multi-head self-attention with a shared key/query projection ``R``.

    Head ``h`` scores with its column slice of ``X @ R`` scaled by
    ``1/sqrt(d_attn / heads)`` and mixes its own feature slice of ``X``.
    """
    d_model, d_attn = R.shape
    if d_model % heads or d_attn % heads:
        raise ValueError(f"widths {d_model} and {d_attn} must be divisible by {heads} heads")
    value_width, key_width = d_model // heads, d_attn // heads
    projected = X @ R
    outputs = []
    for h in range(heads):
        keys = projected[:, h * key_width : (h + 1) * key_width]
        scores = ops.softmax_rows((keys @ keys.T) * (1.0 / math.sqrt(key_width)), mask)
        outputs.append(scores @ X[:, h * value_width : (h + 1) * value_width])
    return outputs[0] if heads == 1 else ops.concat(outputs, axis=1)


def _lstm_block(X: Tensor, params: Mapping[str, Tensor], cfg: EncoderConfig) -> Tensor:
    out = X
    for layer in range(cfg.lstm_layers):
        runs = []
        for direction in cfg.directions:
            stem = f"lstm/layer{layer}/{direction}"
            weights = LSTMWeights(params[f"{stem}/W_x"], params[f"{stem}/W_h"], params[f"{stem}/b"])
            runs.append(lstm_sequence(out, weights, direction))
        out = runs[0] if len(runs) == 1 else ops.concat(runs, axis=1)
    return out


def encode(
    E: Tensor,
    params: Mapping[str, Tensor],
    cfg: EncoderConfig,
    training: bool = False,
    rng: Optional[numpy.random.Generator] = None,
) -> Tensor:
    """Run the encoder blocks over ``E`` and concatenate their outputs."""
    if E.shape[0] == 0:
        raise ValueError("cannot encode an empty sequence")
    mask = causal_mask(E.shape[0]) if cfg.causal else None

    def finish(x: Tensor, block: str) -> Tensor:
        x = ops.layer_normalize(x, params[f"{block}/gain"], params[f"{block}/bias"])
        return ops.dropout(x, cfg.keep, rng, training)

    hidden = ops.relu(E @ params["ffn/W_in"] + params["ffn/b_in"])
    out = finish(hidden @ params["ffn/W_out"] + params["ffn/b_out"], "ffn")
    blocks = [out]
    if cfg.use_lstm:
        out = finish(_lstm_block(out, params, cfg), "lstm")
        blocks.append(out)
    if cfg.use_selfattn:
        out = finish(self_attention(out, params["selfattn/R"], mask, cfg.heads), "selfattn")
        blocks.append(out)
    return blocks[0] if len(blocks) == 1 else ops.concat(blocks, axis=1)


def encode_context(E: Tensor, params: Mapping[str, Tensor], cfg: EncoderConfig, training: bool = False, rng=None) -> Tensor:
    if not cfg.bidirectional or cfg.causal:
        raise ValueError("encode_context expects a bidirectional, unmasked encoder")
    return encode(E, params, cfg, training, rng)


def encode_autoregressive(
    E: Tensor, params: Mapping[str, Tensor], cfg: EncoderConfig, training: bool = False, rng=None
) -> Tensor:
    if cfg.bidirectional or not cfg.causal:
        raise ValueError("encode_autoregressive expects a forward-only, causal encoder")
    return encode(E, params, cfg, training, rng)
