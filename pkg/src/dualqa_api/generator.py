"""Pointer-generator output layer and the dual training loss.

Distributions are computed for all decoder steps at once: row ``t`` of each
matrix is the distribution for step ``t``. The final distribution lives on
the extended id space, the vocabulary followed by context-only words.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy

from tensor_api import ops
from tensor_api.init import fan_avg_init
from tensor_api.tensor import NumericError, Tensor

from dualqa_api.registry import ParameterRegistry

logger = logging.getLogger(__name__)

LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class GeneratorParams:
    W1: Tensor  # d_enc x d_hidden
    b1: Tensor
    W_shared: Tensor  # d_hidden x |V|
    b_shared: Tensor
    W2: Optional[Tensor] = None  # 2 d_enc x 1; absent without the copy path
    b2: Optional[Tensor] = None

    @property
    def copies(self) -> bool:
        return self.W2 is not None

    @classmethod
    def from_registry(cls, registry: ParameterRegistry, task: str) -> "GeneratorParams":
        gate = f"{task}/generator/W2" in registry
        return cls(
            W1=registry[f"{task}/generator/W1"],
            b1=registry[f"{task}/generator/b1"],
            W_shared=registry[f"{task}/output_projection/W_shared"],
            b_shared=registry[f"{task}/output_projection/b_shared"],
            W2=registry[f"{task}/generator/W2"] if gate else None,
            b2=registry[f"{task}/generator/b2"] if gate else None,
        )


def register_generator(
    registry: ParameterRegistry, task: str, d_enc: int, d_hidden: int, copy: bool, rng: numpy.random.Generator
) -> None:
    registry.register(f"{task}/generator/W1", fan_avg_init((d_enc, d_hidden), rng))
    registry.register(f"{task}/generator/b1", numpy.zeros(d_hidden))
    if copy:
        registry.register(f"{task}/generator/W2", fan_avg_init((2 * d_enc, 1), rng))
        registry.register(f"{task}/generator/b2", numpy.zeros(()))


def register_projection(
    registry: ParameterRegistry, prefix: str, d_hidden: int, vocab_size: int, rng: numpy.random.Generator
) -> None:
    registry.register(f"{prefix}/W_shared", fan_avg_init((d_hidden, vocab_size), rng))
    registry.register(f"{prefix}/b_shared", numpy.zeros(vocab_size))


@dataclass(frozen=True)
class MixtureDistribution:
    gate: Tensor  # T x 1
    vocab: Tensor  # T x |V|
    context: Tensor  # T x (|V| + oov)
    final: Tensor  # T x (|V| + oov)


@dataclass
class CoverageState:
    """Attention mass accumulated over the steps decoded so far."""

    cumulative: numpy.ndarray
    step: int = 1

    @classmethod
    def start(cls, context_length: int) -> "CoverageState":
        return cls(numpy.zeros(context_length), 1)

    def penalty(self, scores: numpy.ndarray) -> float:
        return float(numpy.minimum(scores, self.cumulative).sum())

    def update(self, scores: numpy.ndarray) -> float:
        """Penalty of this step's scores, then fold them into the total."""
        value = self.penalty(scores)
        self.cumulative = self.cumulative + scores
        self.step += 1
        return value


def vocab_distribution(decoded: Tensor, params: GeneratorParams) -> Tensor:
    latent = ops.tanh(decoded @ params.W1 + params.b1)
    return ops.softmax_rows(latent @ params.W_shared + params.b_shared)


def context_distribution(scores: Tensor, context_ids: numpy.ndarray, extended_size: int) -> Tensor:
    """Scores summed per extended id; repeated context words merge their mass."""
    context_ids = numpy.asarray(context_ids, dtype=numpy.int64)
    if scores.shape[-1] != context_ids.shape[0]:
        raise ValueError(f"{scores.shape[-1]} scores for {context_ids.shape[0]} context tokens")
    if context_ids.size and context_ids.max() >= extended_size:
        raise ValueError(f"context id {context_ids.max()} outside the extended space of {extended_size}")
    one_hot = numpy.zeros((context_ids.shape[0], extended_size))
    one_hot[numpy.arange(context_ids.shape[0]), context_ids] = 1.0
    return scores @ Tensor(one_hot)


def mixture_gate(decoded: Tensor, previous: Tensor, params: GeneratorParams) -> Tensor:
    """Probability of generating from the vocabulary, one row per step."""
    if not params.copies:
        return Tensor(numpy.ones((decoded.shape[0], 1)))
    joined = ops.concat([decoded, previous], axis=1)
    return ops.sigmoid(joined @ params.W2 + params.b2)


def final_distribution(gate: Tensor, p_vocab: Tensor, p_context: Tensor) -> Tensor:
    extra = p_context.shape[-1] - p_vocab.shape[-1]
    if extra < 0:
        raise ValueError("the context distribution must cover the whole vocabulary")
    return gate * ops.pad_columns(p_vocab, extra) + (1.0 - gate) * p_context


def mixture(
    decoded: Tensor, previous: Tensor, scores: Tensor, context_ids: numpy.ndarray, extended_size: int, params: GeneratorParams
) -> MixtureDistribution:
    gate = mixture_gate(decoded, previous, params)
    p_vocab = vocab_distribution(decoded, params)
    p_context = context_distribution(scores, context_ids, extended_size)
    return MixtureDistribution(gate, p_vocab, p_context, final_distribution(gate, p_vocab, p_context))


def coverage_terms(scores: Tensor) -> Tensor:
    """Per-step ``sum_j min(s_t[j], sum_{t'<t} s_t'[j])`` as a length-``T`` vector."""
    steps = scores.shape[0]
    earlier = Tensor(numpy.tril(numpy.ones((steps, steps)), k=-1))
    return ops.minimum(scores, earlier @ scores).sum(axis=1)


def coverage_penalty(scores, t: int) -> float:
    """Coverage term of step ``t`` (1-based) for a ``T x n`` score matrix.

    >>> coverage_penalty(numpy.array([[0.5, 0.5], [0.5, 0.5]]), 2)
    1.0
    """
    values = scores.data if isinstance(scores, Tensor) else numpy.asarray(scores, dtype=numpy.float64)
    if not 1 <= t <= values.shape[0]:
        raise ValueError(f"step {t} outside 1..{values.shape[0]}")
    return float(numpy.minimum(values[t - 1], values[: t - 1].sum(axis=0)).sum())


@dataclass(frozen=True)
class TaskOutputs:
    """Teacher-forced distributions, scores and gold ids of one task direction."""

    task: str
    distribution: MixtureDistribution
    scores: Tensor  # T x n, second-fold attention
    targets: numpy.ndarray  # T extended ids


@dataclass(frozen=True)
class TaskLoss:
    nll: Tensor
    coverage: Tensor
    clamped: int
    tokens: int


def task_loss(outputs: TaskOutputs) -> TaskLoss:
    steps = outputs.targets.shape[0]
    gold = outputs.distribution.final[numpy.arange(steps), outputs.targets]
    logs, clamped = ops.log_clamped(gold, LOG_FLOOR)
    if clamped:
        logger.debug("%d zero-probability gold token(s) clamped for %s", clamped, outputs.task)
    coverage = coverage_terms(outputs.scores).sum()
    return TaskLoss(-logs.sum(), coverage, clamped, steps)


@dataclass(frozen=True)
class LossBreakdown:
    total: Tensor
    qa: Optional[Tensor]
    qg: Optional[Tensor]
    coverage: float
    clamped: int
    tokens: int
    nll: float


def dual_loss(
    qg: Optional[TaskOutputs],
    qa: Optional[TaskOutputs],
    kappa: float = 1.0,
    qa_weight: float = 1.0,
    qg_weight: float = 1.0,
) -> LossBreakdown:
    """Summed NLL plus ``kappa`` times coverage over the enabled directions."""
    if qg is None and qa is None:
        raise ValueError("dual_loss needs at least one task direction")
    parts = {}
    weights = {"qa": qa_weight, "qg": qg_weight}
    for name, outputs in (("qg", qg), ("qa", qa)):
        if outputs is not None:
            parts[name] = task_loss(outputs)
    terms = {name: part.nll + kappa * part.coverage for name, part in parts.items()}
    total = None
    for name, term in terms.items():
        weighted = term * weights[name] if weights[name] != 1.0 else term
        total = weighted if total is None else total + weighted
    if not numpy.isfinite(total.data).all():
        raise NumericError("dual loss is not finite")
    return LossBreakdown(
        total=total,
        qa=terms.get("qa"),
        qg=terms.get("qg"),
        coverage=sum(float(p.coverage.data) for p in parts.values()),
        clamped=sum(p.clamped for p in parts.values()),
        tokens=sum(p.tokens for p in parts.values()),
        nll=sum(float(p.nll.data) for p in parts.values()),
    )


def merge_losses(losses: Sequence[LossBreakdown]) -> LossBreakdown:
    """Mean of per-triplet losses; counters are summed."""
    if not losses:
        raise ValueError("no losses to merge")
    scale = 1.0 / len(losses)

    def mean(values):
        present = [v for v in values if v is not None]
        if not present:
            return None
        out = present[0]
        for v in present[1:]:
            out = out + v
        return out * scale

    return LossBreakdown(
        total=mean([l.total for l in losses]),
        qa=mean([l.qa for l in losses]),
        qg=mean([l.qg for l in losses]),
        coverage=sum(l.coverage for l in losses) * scale,
        clamped=sum(l.clamped for l in losses),
        tokens=sum(l.tokens for l in losses),
        nll=sum(l.nll for l in losses),
    )


def gold_probabilities(outputs: TaskOutputs) -> numpy.ndarray:
    steps = outputs.targets.shape[0]
    return outputs.distribution.final.data[numpy.arange(steps), outputs.targets]


def per_token_nll(outputs: Mapping[str, TaskOutputs]) -> float:
    """Mean negative log-likelihood per gold token across tasks."""
    logs = [numpy.log(numpy.maximum(gold_probabilities(o), LOG_FLOOR)) for o in outputs.values()]
    return float(-numpy.concatenate(logs).mean())
