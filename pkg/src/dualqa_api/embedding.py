"""Word + character-CNN embedding followed by a projection and a highway layer.

One parameter set embeds context, question and answer tokens alike.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy

from tensor_api import ops
from tensor_api.init import fan_avg_init
from tensor_api.tensor import Tensor

from dualqa_api.config import ModelConfig
from dualqa_api.registry import ParameterRegistry
from dualqa_api.vocabulary import CharTable, WordEmbeddingTable

CONV_WIDTH = 3


@dataclass(frozen=True)
class EmbeddingParams:
    word: Tensor  # |V| x d_word
    chars: Tensor  # num_chars x d_char, row 0 pinned to zero
    kernel: Tensor  # (CONV_WIDTH * d_char) x d_char
    kernel_bias: Tensor
    H1: Tensor
    v1: Tensor
    H2: Tensor
    v2: Tensor
    H3: Tensor
    v3: Tensor

    @classmethod
    def from_scope(cls, scope: Mapping[str, Tensor]) -> "EmbeddingParams":
        return cls(
            word=scope["word"],
            chars=scope["chars"],
            kernel=scope["conv/kernel"],
            kernel_bias=scope["conv/bias"],
            H1=scope["highway/H1"],
            v1=scope["highway/v1"],
            H2=scope["highway/H2"],
            v2=scope["highway/v2"],
            H3=scope["highway/H3"],
            v3=scope["highway/v3"],
        )


def register_embedding(
    registry: ParameterRegistry,
    config: ModelConfig,
    words: WordEmbeddingTable,
    chars: CharTable,
    rng: numpy.random.Generator,
    prefix: str = "embedding",
) -> None:
    if words.matrix.shape[1] != config.d_word:
        raise ValueError(f"Word table has width {words.matrix.shape[1]}, expected d_word={config.d_word}.")
    registry.register(f"{prefix}/word", words.matrix, update_mask=words.update_mask)

    char_matrix = fan_avg_init((len(chars), config.d_char), rng)
    char_matrix[CharTable.PAD_CHAR] = 0.0
    char_mask = numpy.ones_like(char_matrix)
    char_mask[CharTable.PAD_CHAR] = 0.0
    registry.register(f"{prefix}/chars", char_matrix, update_mask=char_mask)

    registry.register(f"{prefix}/conv/kernel", fan_avg_init((CONV_WIDTH * config.d_char, config.d_char), rng))
    registry.register(f"{prefix}/conv/bias", numpy.zeros(config.d_char))

    bias_shape = (config.d_embed,) if config.vector_highway_bias else ()
    registry.register(f"{prefix}/highway/H1", fan_avg_init((config.d_word + config.d_char, config.d_embed), rng))
    registry.register(f"{prefix}/highway/v1", numpy.zeros(bias_shape))
    registry.register(f"{prefix}/highway/H2", fan_avg_init((config.d_embed, config.d_embed), rng))
    registry.register(f"{prefix}/highway/v2", numpy.zeros(bias_shape))
    registry.register(f"{prefix}/highway/H3", fan_avg_init((config.d_embed, config.d_embed), rng))
    registry.register(f"{prefix}/highway/v3", numpy.zeros(bias_shape))


def char_windows(char_ids: numpy.ndarray, width: int = CONV_WIDTH) -> numpy.ndarray:
    """Zero-padded sliding windows, ``L x W x width`` for ``L x W`` char ids.

    >>> char_windows(numpy.array([[5, 6]]))[0].tolist()
    [[0, 5, 6], [5, 6, 0]]
    """
    half = width // 2
    padded = numpy.pad(char_ids, ((0, 0), (half, width - 1 - half)))
    steps = char_ids.shape[1]
    return numpy.stack([padded[:, k : k + steps] for k in range(width)], axis=-1)


def char_vectors(char_ids: numpy.ndarray, params: EmbeddingParams) -> Tensor:
    """Convolution over each word's characters, then max over positions."""
    windows = char_windows(char_ids)
    length, steps, width = windows.shape
    gathered = params.chars[windows]  # L x W x width x d_char
    flat = gathered.reshape(length, steps, width * params.chars.shape[1])
    conv = flat @ params.kernel + params.kernel_bias
    return ops.max_along(conv, axis=1)


def highway(e: Tensor, params: EmbeddingParams) -> Tensor:
    gate = ops.sigmoid(e @ params.H2 + params.v2)
    return gate * e + (1.0 - gate) * (e @ params.H3 + params.v3)


def embed_sequence(word_ids: numpy.ndarray, char_ids: numpy.ndarray, params: EmbeddingParams) -> Tensor:
    """``L x d_embed`` vectors for ``L`` word ids and their ``L x W`` char ids."""
    word_ids = numpy.asarray(word_ids, dtype=numpy.int64)
    char_ids = numpy.asarray(char_ids, dtype=numpy.int64)
    if word_ids.shape[0] == 0:
        raise ValueError("embed_sequence needs at least one token")
    if char_ids.shape[0] != word_ids.shape[0]:
        raise ValueError(f"{word_ids.shape[0]} words but {char_ids.shape[0]} char rows")
    words = params.word[word_ids]
    e = ops.concat([words, char_vectors(char_ids, params)], axis=1) @ params.H1 + params.v1
    return highway(e, params)
