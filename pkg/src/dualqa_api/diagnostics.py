"""Finite-difference checks of the analytic gradients, op by op and end to end."""

from __future__ import annotations

import dataclasses
import logging
from typing import Callable, Dict, Iterable, Mapping, Tuple

import numpy

from tensor_api import ops
from tensor_api.gradcheck import check_gradients, sample_coordinates
from tensor_api.recurrent import BACKWARD, LSTMWeights, lstm_sequence
from tensor_api.tensor import Tensor

from dualqa_api.attention import fold_first, fold_second
from dualqa_api.config import ModelConfig
from dualqa_api.embedding import EmbeddingParams, embed_sequence
from dualqa_api.encoders import EncoderConfig, encode_autoregressive, encode_context
from dualqa_api.generator import GeneratorParams, coverage_terms, mixture
from dualqa_api.model import assemble_model, encode_triplet, triplet_loss
from dualqa_api.synthetic import corpus_tokens, synthetic_triplets
from dualqa_api.vocabulary import build_vocabulary

logger = logging.getLogger(__name__)

Check = Tuple[Callable[[], Tensor], Mapping[str, Tensor]]

GRADCHECK_CONFIG = ModelConfig(
    d_word=16,
    d_char=8,
    d_embed=16,
    d_model=16,
    d_hidden=32,
    context_heads=2,
    sequence_heads=2,
    lstm_layers=1,
    keep=1.0,
)


def _param(rng: numpy.random.Generator, *shape: int, scale: float = 0.5) -> Tensor:
    return Tensor(rng.normal(0.0, scale, size=shape), requires_grad=True)


def primitive_checks(seed: int) -> Dict[str, Check]:
    rng = numpy.random.default_rng(seed)
    x = _param(rng, 4, 5)
    logits = _param(rng, 3, 4)
    mask = numpy.zeros((3, 4))
    mask[0, 3] = ops.MASK_VALUE
    gain, bias = _param(rng, 5), _param(rng, 5)
    w_softmax = rng.normal(size=(3, 4))
    w_norm = rng.normal(size=(4, 5))
    weights = LSTMWeights(_param(rng, 5, 12), _param(rng, 3, 12), _param(rng, 12))
    w_lstm = rng.normal(size=(4, 3))
    a, b = _param(rng, 3, 4), _param(rng, 3, 4, scale=2.0)
    w_min = rng.normal(size=(3, 4))
    return {
        "softmax_rows": (lambda: (ops.softmax_rows(logits, mask) * w_softmax).sum(), {"logits": logits}),
        "layer_normalize": (
            lambda: (ops.layer_normalize(x, gain, bias) * w_norm).sum(),
            {"x": x, "gain": gain, "bias": bias},
        ),
        "lstm_sequence": (
            lambda: (lstm_sequence(x, weights, BACKWARD) * w_lstm).sum(),
            {"x": x, "W_x": weights.W_x, "W_h": weights.W_h, "b": weights.b},
        ),
        "minimum_log": (
            lambda: (ops.minimum(a, b) * w_min).sum() + ops.log_clamped(ops.exp(a))[0].sum(),
            {"a": a, "b": b},
        ),
    }


def _toy_model(config: ModelConfig, seed: int):
    triplets = synthetic_triplets(count=2, vocab_size=46, context_range=(10, 12), seed=seed)
    vocab = build_vocabulary(corpus_tokens(triplets), min_count=1)
    model = assemble_model(dataclasses.replace(config, seed=seed), vocab)
    return model, triplets[0]


def model_checks(config: ModelConfig, seed: int) -> Dict[str, Check]:
    model, triplet = _toy_model(config, seed)
    rng = numpy.random.default_rng(seed + 1000)
    registry = model.registry
    encoded = encode_triplet(model, triplet)
    embedding_scope = {f"embedding/{k}": v for k, v in registry.scope("embedding").items()}
    embedding = EmbeddingParams.from_scope(registry.scope("embedding"))
    tokens = triplet.context_tokens[:4]

    def embed(tok=tokens):
        return embed_sequence(model.vocab.ids(tok), model.chars.sequence_ids(tok), embedding)

    w_embed = rng.normal(size=(len(tokens), config.d_embed))
    E = Tensor(rng.normal(size=(4, config.d_embed)))
    context_scope = registry.scope("qa/context_encoder")
    sequence_scope = registry.scope("qa/answer_encoder")
    w_enc = rng.normal(size=(4, config.d_enc))

    C = _param(rng, 6, config.d_enc)
    Q = _param(rng, 3, config.d_enc)
    D = _param(rng, 4, config.d_enc)
    first = registry.scope("attention/context_question")
    second = registry.scope("attention/answer_context")
    w_fold = rng.normal(size=(4, config.d_enc))
    generator = GeneratorParams.from_registry(registry, "qa")
    generator_params = {"D": D, "W1": generator.W1, "W2": generator.W2, "W_shared": generator.W_shared}
    scores = ops.softmax_rows(_param(rng, 4, len(encoded.extended_ids)))
    w_final = rng.normal(size=(4, encoded.extended_size))

    def fold():
        folded = fold_first(C, Q, first["U"], first["V"])
        attended, s = fold_second(D, folded, second["U"], second["V"])
        return (attended * w_fold).sum() + coverage_terms(s.values).sum()

    def generate():
        dist = mixture(D, C[:4], scores, encoded.extended_ids, encoded.extended_size, generator)
        return (dist.final * w_final).sum()

    return {
        "embed_sequence": (lambda: (embed() * w_embed).sum(), embedding_scope),
        "encode_context": (
            lambda: (encode_context(E, context_scope, EncoderConfig.for_context(config)) * w_enc).sum(),
            context_scope,
        ),
        "encode_autoregressive": (
            lambda: (encode_autoregressive(E, sequence_scope, EncoderConfig.for_sequence(config)) * w_enc).sum(),
            sequence_scope,
        ),
        "fold": (fold, {"C": C, "Q": Q, "D": D, **{f"first/{k}": v for k, v in first.items()},
                        **{f"second/{k}": v for k, v in second.items()}}),
        "generator": (generate, {k: v for k, v in generator_params.items() if v is not None}),
        "dual_loss": (lambda: triplet_loss(model, encoded).total, model.params),
    }


def run_gradient_suite(
    config: ModelConfig = GRADCHECK_CONFIG, seeds: Iterable[int] = range(5), per_tensor: int = 3
) -> Dict[str, float]:
    """Worst relative error per check over all seeds.

    Large tensors are checked on ``per_tensor`` sampled coordinates.
    """
    if config.keep < 1.0:
        raise ValueError("gradient checks need dropout disabled (keep = 1)")
    worst: Dict[str, float] = {}
    for seed in seeds:
        checks = {**primitive_checks(seed), **model_checks(config, seed)}
        rng = numpy.random.default_rng(seed)
        for name, (f, params) in checks.items():
            coords = sample_coordinates(params, per_tensor, rng)
            error = check_gradients(f, params, coordinates=coords)
            worst[name] = max(worst.get(name, 0.0), error)
            logger.debug("seed %d %s: %.3e", seed, name, error)
    return worst
