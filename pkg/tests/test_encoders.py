import dataclasses

import numpy
import pytest

from tensor_api.gradcheck import check_gradients, sample_coordinates
from tensor_api.ops import MASK_VALUE
from tensor_api.tensor import Tensor

from dualqa_api.encoders import (
    EncoderConfig,
    causal_mask,
    encode,
    encode_autoregressive,
    encode_context,
    register_encoder,
    self_attention,
)
from dualqa_api.registry import ParameterRegistry

SEQUENCE = EncoderConfig(d_model=8, lstm_layers=2, heads=2, bidirectional=False, causal=True, d_attn=4, d_ff=12)
CONTEXT = dataclasses.replace(SEQUENCE, bidirectional=True, causal=False)


def build(cfg, d_in=6, seed=0):
    registry = ParameterRegistry()
    register_encoder(registry, "enc", cfg, d_in, numpy.random.default_rng(seed))
    return registry.scope("enc")


def inputs(rows, d_in=6, seed=1):
    return Tensor(numpy.random.default_rng(seed).normal(size=(rows, d_in)))


def test_causal_mask():
    mask = causal_mask(3)
    assert mask[0, 1] == mask[1, 2] == MASK_VALUE
    assert (numpy.tril(mask) == 0).all()
    with pytest.raises(ValueError):
        causal_mask(0)


def test_single_token_attends_to_itself():
    X = inputs(1, 8)
    out = self_attention(X, Tensor(numpy.ones((8, 4))), causal_mask(1), heads=2)
    assert numpy.allclose(out.data, X.data)


def test_zero_projection_averages_visible_rows():
    X = inputs(4, 8)
    R = Tensor(numpy.zeros((8, 4)))
    assert numpy.allclose(self_attention(X, R, heads=2).data, X.data.mean(axis=0)[None, :].repeat(4, 0))
    masked = self_attention(X, R, causal_mask(4), heads=2).data
    running = numpy.cumsum(X.data, axis=0) / numpy.arange(1, 5)[:, None]
    assert numpy.allclose(masked, running)


def test_single_head_matches_direct_formula():
    rng = numpy.random.default_rng(2)
    X, R = rng.normal(size=(5, 6)), rng.normal(size=(6, 4))
    projected = X @ R
    logits = projected @ projected.T / 2.0
    weights = numpy.exp(logits - logits.max(axis=1, keepdims=True))
    weights /= weights.sum(axis=1, keepdims=True)
    assert numpy.allclose(self_attention(Tensor(X), Tensor(R)).data, weights @ X, atol=1e-12)


def test_heads_must_divide_widths():
    with pytest.raises(ValueError, match="divisible by 3 heads"):
        self_attention(inputs(2, 6), Tensor(numpy.ones((6, 4))), heads=3)
    with pytest.raises(ValueError, match="divisible by 3 heads"):
        dataclasses.replace(SEQUENCE, heads=3)


def test_invalid_encoder_configs():
    with pytest.raises(ValueError, match="cannot be bidirectional"):
        dataclasses.replace(SEQUENCE, bidirectional=True)
    with pytest.raises(ValueError, match="LSTM or the self-attention"):
        dataclasses.replace(SEQUENCE, use_lstm=False, use_selfattn=False)


def test_entry_points_check_their_flavour():
    with pytest.raises(ValueError, match="bidirectional, unmasked"):
        encode_context(inputs(3), build(SEQUENCE), SEQUENCE)
    with pytest.raises(ValueError, match="forward-only, causal"):
        encode_autoregressive(inputs(3), build(CONTEXT), CONTEXT)


@pytest.mark.parametrize(
    "cfg, width",
    [
        (SEQUENCE, 24),
        (CONTEXT, 24),
        (dataclasses.replace(SEQUENCE, use_lstm=False), 16),
        (dataclasses.replace(CONTEXT, use_selfattn=False), 16),
    ],
)
def test_output_concatenates_block_outputs(cfg, width):
    out = encode(inputs(5), build(cfg), cfg)
    assert out.shape == (5, width) == (5, cfg.d_enc)


def test_context_lstm_splits_hidden_units_over_directions():
    params = build(CONTEXT)
    assert params["lstm/layer1/backward/W_h"].shape == (4, 16)
    assert params["lstm/layer0/forward/b"].data[4:8].tolist() == [1.0] * 4


def test_encoding_is_deterministic():
    params = build(CONTEXT)
    E = inputs(6)
    assert numpy.array_equal(encode_context(E, params, CONTEXT).data, encode_context(E, params, CONTEXT).data)


@pytest.mark.parametrize("seed", range(50))
def test_autoregressive_rows_ignore_later_tokens(seed):
    rng = numpy.random.default_rng(seed)
    params = build(SEQUENCE, seed=seed)
    rows = int(rng.integers(2, 9))
    cut = int(rng.integers(1, rows))
    E = Tensor(rng.normal(size=(rows, 6)))
    changed = E.data.copy()
    changed[cut:] = rng.normal(size=(rows - cut, 6))
    a = encode_autoregressive(E, params, SEQUENCE).data
    b = encode_autoregressive(Tensor(changed), params, SEQUENCE).data
    assert numpy.array_equal(a[:cut], b[:cut])
    assert not numpy.allclose(a[cut:], b[cut:])


def test_context_rows_see_later_tokens():
    params = build(CONTEXT)
    E = inputs(6)
    changed = E.data.copy()
    changed[5] += 3.0
    a = encode_context(E, params, CONTEXT).data
    b = encode_context(Tensor(changed), params, CONTEXT).data
    assert not numpy.allclose(a[0], b[0])


def test_bidirectional_encoder_with_silent_backward_half_equals_forward_encoder():
    bi_cfg = dataclasses.replace(CONTEXT, lstm_layers=1)
    uni_cfg = dataclasses.replace(bi_cfg, bidirectional=False)
    bi, uni = build(bi_cfg), build(uni_cfg, seed=5)
    for name, tensor in bi.items():
        if not name.startswith("lstm/layer"):
            uni[name].data[...] = tensor.data
    for name in ("W_x", "W_h", "b"):
        bi[f"lstm/layer0/backward/{name}"].data[...] = 0.0
        uni[f"lstm/layer0/forward/{name}"].data[...] = 0.0
    half, full = 4, 8
    for gate in range(4):
        source = slice(gate * half, (gate + 1) * half)
        target = slice(gate * full, gate * full + half)
        uni["lstm/layer0/forward/W_x"].data[:, target] = bi["lstm/layer0/forward/W_x"].data[:, source]
        uni["lstm/layer0/forward/W_h"].data[:half, target] = bi["lstm/layer0/forward/W_h"].data[:, source]
        uni["lstm/layer0/forward/b"].data[target] = bi["lstm/layer0/forward/b"].data[source]
    E = inputs(5)
    assert numpy.allclose(encode(E, bi, bi_cfg).data, encode(E, uni, uni_cfg).data, atol=1e-12)


def test_dropout_only_acts_while_training():
    cfg = dataclasses.replace(SEQUENCE, keep=0.5)
    params = build(cfg)
    E = inputs(4)
    evaluated = encode(E, params, cfg).data
    assert numpy.array_equal(evaluated, encode(E, params, cfg).data)
    trained = encode(E, params, cfg, training=True, rng=numpy.random.default_rng(0)).data
    assert (trained == 0).any()
    assert not numpy.allclose(trained, evaluated)


def test_empty_sequence_raises():
    with pytest.raises(ValueError, match="empty sequence"):
        encode(Tensor(numpy.zeros((0, 6))), build(SEQUENCE), SEQUENCE)


@pytest.mark.parametrize("cfg", [SEQUENCE, CONTEXT])
def test_encoder_gradients_match_finite_differences(cfg):
    params = build(cfg)
    E = Tensor(inputs(4).data, requires_grad=True)
    w = numpy.random.default_rng(3).normal(size=(4, cfg.d_enc))
    checked = {"E": E, **params}
    coords = sample_coordinates(checked, 2, numpy.random.default_rng(4))
    assert check_gradients(lambda: (encode(E, params, cfg) * w).sum(), checked, coordinates=coords) < 1e-4
