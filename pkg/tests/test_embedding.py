import dataclasses

import numpy
import pytest

from tensor_api import ops
from tensor_api.gradcheck import check_gradients, sample_coordinates
from tensor_api.tensor import Tensor

from dualqa_api.embedding import EmbeddingParams, char_vectors, char_windows, embed_sequence
from dualqa_api.model import embed_tokens
from dualqa_api.vocabulary import CharTable, PAD


def params_of(model):
    return EmbeddingParams.from_scope(model.registry.scope("embedding"))


def test_embedding_shape(model):
    out = embed_tokens(model, ["what", "is", "zzz", "?"])
    assert out.shape == (4, model.config.d_embed)


def test_pad_rows_are_zero_and_frozen(model):
    reg = model.registry
    assert not reg["embedding/chars"].data[CharTable.PAD_CHAR].any()
    assert not reg.update_mask("embedding/chars")[CharTable.PAD_CHAR].any()
    assert not reg["embedding/word"].data[PAD].any()


def test_highway_biases_are_scalars_unless_asked(model):
    assert params_of(model).v2.shape == ()


def test_same_token_gets_the_same_vector(model):
    out = embed_tokens(model, ["alpha", "beta", "alpha"]).data
    assert numpy.allclose(out[0], out[2], atol=1e-12)
    assert not numpy.allclose(out[0], out[1])


def test_word_without_characters_pools_to_the_conv_bias(model):
    params = params_of(model)
    params.kernel_bias.data[:] = numpy.arange(params.kernel_bias.shape[0])
    pooled = char_vectors(numpy.zeros((2, 5), dtype=numpy.int64), params)
    assert pooled.data.tolist() == [params.kernel_bias.data.tolist()] * 2


def test_windows_cover_each_position():
    windows = char_windows(numpy.array([[1, 2, 3, 0]]))
    assert windows.shape == (1, 4, 3)
    assert windows[0, 2].tolist() == [2, 3, 0]


def test_open_highway_gate_passes_the_projection_through(model):
    params = dataclasses.replace(params_of(model), v2=Tensor(50.0))
    tokens = ["what", "is"]
    word_ids, char_ids = model.vocab.ids(tokens), model.chars.sequence_ids(tokens)
    projected = ops.concat([params.word[word_ids], char_vectors(char_ids, params)], axis=1) @ params.H1 + params.v1
    out = embed_sequence(word_ids, char_ids, params)
    assert numpy.allclose(out.data, projected.data, atol=1e-9)


def test_empty_or_mismatched_input_raises(model):
    params = params_of(model)
    with pytest.raises(ValueError, match="at least one token"):
        embed_sequence(numpy.zeros(0), numpy.zeros((0, 16)), params)
    with pytest.raises(ValueError, match="2 words but 1 char rows"):
        embed_sequence(numpy.array([4, 5]), numpy.zeros((1, 16)), params)


def test_embedding_gradients_match_finite_differences(model):
    scope = {f"embedding/{k}": v for k, v in model.registry.scope("embedding").items()}
    rng = numpy.random.default_rng(0)
    w = rng.normal(size=(3, model.config.d_embed))
    tokens = ["what", "is", "after"]
    coords = sample_coordinates(scope, 3, rng)
    error = check_gradients(lambda: (embed_tokens(model, tokens) * w).sum(), scope, coordinates=coords)
    assert error < 1e-4
