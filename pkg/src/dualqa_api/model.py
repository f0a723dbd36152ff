"""Model assembly and the teacher-forced forward pass for QA and QG.

Both directions run the same code; a :class:`TaskWiring` says which
modality is the counterpart folded into the context, which one is decoded,
and which attention sites serve each fold.

Logical parameter names always carry the task prefix
(``qa/context_encoder/...``); the registry resolves them to one physical
tensor unless an unshare switch asks for separate copies.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy

from squad_connector.squad import Triplet
from tensor_api.tensor import Tensor

from dualqa_api.attention import (
    ANSWER_CONTEXT,
    CONTEXT_ANSWER,
    CONTEXT_QUESTION,
    QUESTION_CONTEXT,
    AttentionScores,
    FoldedContext,
    fold_first,
    fold_second,
    register_site,
)
from dualqa_api.config import ModelConfig
from dualqa_api.embedding import EmbeddingParams, embed_sequence, register_embedding
from dualqa_api.encoders import EncoderConfig, encode_autoregressive, encode_context, register_encoder
from dualqa_api.generator import (
    GeneratorParams,
    LossBreakdown,
    MixtureDistribution,
    TaskOutputs,
    dual_loss,
    mixture,
    register_generator,
    register_projection,
)
from dualqa_api.registry import ParameterRegistry
from dualqa_api.vocabulary import (
    END_TOKEN,
    START_TOKEN,
    CharTable,
    Vocabulary,
    WordEmbeddingTable,
    extend_with_context,
    initial_word_table,
    target_ids,
)

logger = logging.getLogger(__name__)

QA = "qa"
QG = "qg"
CONTEXT_ENCODER = "context_encoder"
QUESTION_ENCODER = "question_encoder"
ANSWER_ENCODER = "answer_encoder"
OUTPUT_PROJECTION = "output_projection"
SHARED_SCOPES = ("embedding", CONTEXT_ENCODER, QUESTION_ENCODER, ANSWER_ENCODER, OUTPUT_PROJECTION)


@dataclass(frozen=True)
class TaskWiring:
    task: str
    source: str  # counterpart field folded into the context
    source_encoder: str
    first_site: str
    target: str  # field being generated
    target_encoder: str
    second_site: str


WIRING: Dict[str, TaskWiring] = {
    QA: TaskWiring(QA, "question", QUESTION_ENCODER, CONTEXT_QUESTION, "answer", ANSWER_ENCODER, ANSWER_CONTEXT),
    QG: TaskWiring(QG, "answer", ANSWER_ENCODER, CONTEXT_ANSWER, "question", QUESTION_ENCODER, QUESTION_CONTEXT),
}


@dataclass
class DualModel:
    config: ModelConfig
    vocab: Vocabulary
    registry: ParameterRegistry
    chars: CharTable

    @property
    def tasks(self) -> Tuple[str, ...]:
        return self.config.tasks

    @property
    def params(self) -> Dict[str, Tensor]:
        return self.registry.physical

    def census(self, prefixes: Optional[Sequence[str]] = None) -> int:
        return self.registry.census(prefixes)


def _shared_or_per_task(
    registry: ParameterRegistry, name: str, tasks: Sequence[str], unshare: bool, register
) -> None:
    if unshare:
        for task in tasks:
            register(f"{task}/{name}")
        return
    register(name)
    for task in tasks:
        registry.alias_prefix(f"{task}/{name}", name)


def assemble_model(
    config: ModelConfig, vocab: Vocabulary, words: Optional[WordEmbeddingTable] = None
) -> DualModel:
    """Register every parameter the configured tasks and ablations need."""
    config.validate()
    rng = numpy.random.default_rng(config.seed)
    registry = ParameterRegistry()
    chars = CharTable(config.max_word_length)
    tasks = config.tasks
    dual = len(tasks) == 2

    if words is None:
        words = initial_word_table(vocab, config.d_word, rng)
    register_embedding(registry, config, words, chars, rng)

    context_cfg = EncoderConfig.for_context(config)
    sequence_cfg = EncoderConfig.for_sequence(config)
    for name, cfg, unshare in (
        (CONTEXT_ENCODER, context_cfg, config.unshare_context_encoder),
        (QUESTION_ENCODER, sequence_cfg, config.unshare_qa_encoders),
        (ANSWER_ENCODER, sequence_cfg, config.unshare_qa_encoders),
    ):
        _shared_or_per_task(
            registry, name, tasks, dual and unshare,
            lambda prefix, cfg=cfg: register_encoder(registry, prefix, cfg, config.d_embed, rng),
        )

    share_attention = dual and config.share_attention
    for task in tasks:
        wiring = WIRING[task]
        sites = (wiring.second_site,) if config.no_context_attention else (wiring.first_site, wiring.second_site)
        for site in sites:
            if share_attention and site in (CONTEXT_QUESTION, ANSWER_CONTEXT):
                continue
            register_site(registry, site, config.d_enc, config.prime_width, rng)
    if share_attention:
        if not config.no_context_attention:
            registry.alias_prefix(f"attention/{CONTEXT_QUESTION}", f"attention/{CONTEXT_ANSWER}")
        registry.alias_prefix(f"attention/{ANSWER_CONTEXT}", f"attention/{QUESTION_CONTEXT}")

    for task in tasks:
        register_generator(registry, task, config.d_enc, config.d_hidden, not config.no_copy, rng)
    _shared_or_per_task(
        registry, OUTPUT_PROJECTION, tasks, dual and config.unshare_output_projection,
        lambda prefix: register_projection(registry, prefix, config.d_hidden, len(vocab), rng),
    )
    model = DualModel(config, vocab, registry, chars)
    logger.info("assembled %s model with %d parameters", config.mode, model.census())
    return model


@dataclass(frozen=True)
class EncodedTriplet:
    """Token sequences with the context mapped onto the extended id space."""

    context: Tuple[str, ...]
    question: Tuple[str, ...]
    answer: Tuple[str, ...]
    extended_ids: numpy.ndarray  # per context position
    oov: Tuple[str, ...]
    extended_size: int

    def tokens(self, field: str) -> Tuple[str, ...]:
        return getattr(self, field)


def encode_tokens(
    model: DualModel, context: Sequence[str], question: Sequence[str] = (), answer: Sequence[str] = ()
) -> EncodedTriplet:
    extended, oov = extend_with_context(model.vocab, context)
    return EncodedTriplet(
        tuple(context), tuple(question), tuple(answer), extended, tuple(oov), len(model.vocab) + len(oov)
    )


def encode_triplet(model: DualModel, triplet: Triplet) -> EncodedTriplet:
    return encode_tokens(model, triplet.context_tokens, triplet.question_tokens, triplet.answer_tokens)


def embed_tokens(model: DualModel, tokens: Sequence[str]) -> Tensor:
    params = EmbeddingParams.from_scope(model.registry.scope("embedding"))
    return embed_sequence(model.vocab.ids(tokens), model.chars.sequence_ids(tokens), params)


@dataclass(frozen=True)
class TaskContext:
    """Everything the decoder of one task needs besides its own prefix."""

    wiring: TaskWiring
    encoded: EncodedTriplet
    folded: FoldedContext
    generator: GeneratorParams


def prepare_task(
    model: DualModel, encoded: EncodedTriplet, task: str, training: bool = False, rng=None
) -> TaskContext:
    """Encode context and counterpart and run the first fold."""
    if task not in model.tasks:
        raise ValueError(f"task {task!r} is not part of a {model.config.mode} model")
    wiring = WIRING[task]
    registry = model.registry
    context = encode_context(
        embed_tokens(model, encoded.tokens("context")),
        registry.scope(f"{task}/{CONTEXT_ENCODER}"),
        EncoderConfig.for_context(model.config),
        training,
        rng,
    )
    if model.config.no_context_attention:
        folded = FoldedContext(context, f"{task}:context")
    else:
        counterpart = encode_autoregressive(
            embed_tokens(model, encoded.tokens(wiring.source)),
            registry.scope(f"{task}/{wiring.source_encoder}"),
            EncoderConfig.for_sequence(model.config),
            training,
            rng,
        )
        site = registry.scope(f"attention/{wiring.first_site}")
        folded = fold_first(context, counterpart, site["U"], site["V"], f"{task}:{wiring.first_site}")
    return TaskContext(wiring, encoded, folded, GeneratorParams.from_registry(registry, task))


def decode_steps(
    model: DualModel, ctx: TaskContext, inputs: Sequence[str], training: bool = False, rng=None
) -> Tuple[MixtureDistribution, AttentionScores]:
    """Distributions for every position of a decoder input sequence."""
    registry = model.registry
    task = ctx.wiring.task
    decoded = encode_autoregressive(
        embed_tokens(model, inputs),
        registry.scope(f"{task}/{ctx.wiring.target_encoder}"),
        EncoderConfig.for_sequence(model.config),
        training,
        rng,
    )
    site = registry.scope(f"attention/{ctx.wiring.second_site}")
    attended, scores = fold_second(decoded, ctx.folded, site["U"], site["V"], f"{task}:{ctx.wiring.second_site}")
    dist = mixture(attended, decoded, scores.values, ctx.encoded.extended_ids, ctx.encoded.extended_size, ctx.generator)
    return dist, scores


def forward_task(
    model: DualModel, encoded: EncodedTriplet, task: str, training: bool = False, rng=None
) -> TaskOutputs:
    """Teacher-forced pass: inputs are START + gold, targets are gold + END."""
    ctx = prepare_task(model, encoded, task, training, rng)
    gold = list(encoded.tokens(ctx.wiring.target))
    dist, scores = decode_steps(model, ctx, [START_TOKEN] + gold, training, rng)
    targets = target_ids(model.vocab, gold + [END_TOKEN], encoded.oov)
    return TaskOutputs(task, dist, scores.values, targets)


def forward_dual(
    model: DualModel, encoded: EncodedTriplet, training: bool = False, rng=None
) -> Dict[str, TaskOutputs]:
    return {task: forward_task(model, encoded, task, training, rng) for task in model.tasks}


def loss_from_outputs(model: DualModel, outputs: Mapping[str, TaskOutputs]) -> LossBreakdown:
    cfg = model.config
    return dual_loss(outputs.get(QG), outputs.get(QA), cfg.kappa, cfg.qa_weight, cfg.qg_weight)


def triplet_loss(model: DualModel, encoded: EncodedTriplet, training: bool = False, rng=None) -> LossBreakdown:
    return loss_from_outputs(model, forward_dual(model, encoded, training, rng))
