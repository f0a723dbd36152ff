import dataclasses

import pytest

from dualqa_api.config import ModelConfig
from dualqa_api.model import assemble_model
from dualqa_api.synthetic import corpus_tokens, synthetic_triplets
from dualqa_api.vocabulary import build_vocabulary

# Small enough that a full forward pass takes milliseconds; dropout off.
TINY = ModelConfig(
    d_word=8,
    d_char=4,
    d_embed=8,
    d_model=8,
    d_hidden=12,
    context_heads=2,
    sequence_heads=2,
    lstm_layers=1,
    keep=1.0,
    min_count=1,
    decode_cap=10,
    batch_size=2,
    warmup_steps=10,
    log_every=1,
)


def tiny_config(**overrides) -> ModelConfig:
    return dataclasses.replace(TINY, **overrides)


@pytest.fixture
def triplets():
    return synthetic_triplets(count=4, vocab_size=20, context_range=(6, 8), seed=3)


@pytest.fixture
def vocab(triplets):
    return build_vocabulary(corpus_tokens(triplets), min_count=1)


@pytest.fixture
def model(vocab):
    return assemble_model(tiny_config(), vocab)
