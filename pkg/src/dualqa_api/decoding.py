"""Greedy auto-regressive generation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy

from squad_connector.squad import Triplet

from dualqa_api.generator import CoverageState
from dualqa_api.model import WIRING, DualModel, EncodedTriplet, decode_steps, encode_tokens, encode_triplet, prepare_task
from dualqa_api.vocabulary import END, START_TOKEN, surface


@dataclass
class Generation:
    tokens: List[str]
    ids: List[int]
    attention: Optional[numpy.ndarray] = None  # steps x n, second-fold scores
    coverage: List[float] = field(default_factory=list)

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


def pick_token(distribution: numpy.ndarray) -> int:
    """Most probable extended id; the lowest id wins a tie.

    >>> pick_token(numpy.array([0.25, 0.5, 0.25, 0.5]))
    1
    """
    return int(numpy.argmax(distribution))


def greedy_decode(
    model: DualModel,
    task: str,
    context_tokens: Sequence[str],
    counterpart_tokens: Sequence[str],
    cap: Optional[int] = None,
    return_attention: bool = False,
) -> Generation:
    """Generate until END (not emitted) or ``cap`` tokens, feeding back own outputs.

    The decoder prefix is re-encoded at every step; with the causal encoders
    this gives the same rows as a teacher-forced pass over the output.
    """
    source = WIRING[task].source
    counterpart = {"question": (), "answer": ()}
    counterpart[source] = tuple(counterpart_tokens)
    encoded = encode_tokens(model, context_tokens, counterpart["question"], counterpart["answer"])
    return decode_encoded(model, encoded, task, cap, return_attention)


def decode_encoded(
    model: DualModel, encoded: EncodedTriplet, task: str, cap: Optional[int] = None, return_attention: bool = False
) -> Generation:
    cap = model.config.decode_cap if cap is None else cap
    ctx = prepare_task(model, encoded, task)
    prefix = [START_TOKEN]
    ids: List[int] = []
    tokens: List[str] = []
    rows = []
    coverage = CoverageState.start(len(ctx.folded))
    penalties = []
    while len(ids) < cap:
        dist, scores = decode_steps(model, ctx, prefix)
        step_scores = scores.numpy()[-1]
        rows.append(step_scores)
        penalties.append(coverage.update(step_scores))
        choice = pick_token(dist.final.data[-1])
        if choice == END:
            break
        token = surface(model.vocab, choice, encoded.oov)
        ids.append(choice)
        tokens.append(token)
        prefix.append(token)
    attention = numpy.stack(rows) if return_attention and rows else None
    return Generation(tokens, ids, attention, penalties)


def generate_for(
    model: DualModel, triplet: Triplet, task: str, cap: Optional[int] = None, return_attention: bool = False
) -> Generation:
    """Generate the task's target from the triplet's gold counterpart."""
    return decode_encoded(model, encode_triplet(model, triplet), task, cap, return_attention)
