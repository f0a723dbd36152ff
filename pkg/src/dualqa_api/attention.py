"""Two-step attention fusion shared by both task directions.

The first fold attends from the encoded context over the counterpart
(answer for QG, question for QA) and yields a context-length matrix. The
second fold attends from the decoder prefix over that folded context; its
scores are reused by the copy distribution and the coverage penalty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy

from tensor_api import ops
from tensor_api.init import fan_avg_init
from tensor_api.tensor import Tensor

from dualqa_api.registry import ParameterRegistry

CONTEXT_ANSWER = "context_answer"
CONTEXT_QUESTION = "context_question"
QUESTION_CONTEXT = "question_context"
ANSWER_CONTEXT = "answer_context"
SITES = (CONTEXT_ANSWER, CONTEXT_QUESTION, QUESTION_CONTEXT, ANSWER_CONTEXT)


@dataclass(frozen=True)
class AttentionScores:
    values: Tensor  # p x q, rows sum to one
    tag: str = ""

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    def numpy(self) -> numpy.ndarray:
        return self.values.data


@dataclass(frozen=True)
class FoldedContext:
    values: Tensor  # n x d_enc
    tag: str = ""

    def __len__(self) -> int:
        return self.values.shape[0]


def register_site(registry: ParameterRegistry, site: str, d_enc: int, d_prime: int, rng: numpy.random.Generator) -> None:
    registry.register(f"attention/{site}/U", fan_avg_init((d_enc, d_prime), rng))
    registry.register(f"attention/{site}/V", fan_avg_init((d_enc, d_prime), rng))


def bilinear_scores(X: Tensor, Y: Tensor, U: Tensor, V: Tensor, tag: str = "") -> AttentionScores:
    """``softmax((X U)(Y V)^T / sqrt(d_enc))`` row by row."""
    if X.shape[0] == 0 or Y.shape[0] == 0:
        raise ValueError("attention needs non-empty sequences on both sides")
    logits = (X @ U) @ (Y @ V).T
    return AttentionScores(ops.softmax_rows(logits * (1.0 / math.sqrt(X.shape[1]))), tag)


def fold_first(context: Tensor, counterpart: Tensor, U: Tensor, V: Tensor, tag: str = "") -> FoldedContext:
    """Counterpart rows mixed into every context position."""
    scores = bilinear_scores(context, counterpart, U, V, tag)
    return FoldedContext(scores.values @ counterpart, tag)


def fold_second(
    prefix: Tensor, folded: FoldedContext, U: Tensor, V: Tensor, tag: str = ""
) -> Tuple[Tensor, AttentionScores]:
    """Folded-context rows mixed into every prefix position, with the scores."""
    scores = bilinear_scores(prefix, folded.values, U, V, tag)
    return scores.values @ folded.values, scores
