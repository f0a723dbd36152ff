"""BLEU-1..4 and ROUGE-L reports for generated answers and questions."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy

from metrics_api.bleu import bleu, corpus_bleu
from metrics_api.rouge import rouge_l
from squad_connector.squad import Triplet

from dualqa_api.decoding import Generation, generate_for
from dualqa_api.model import WIRING, DualModel

logger = logging.getLogger(__name__)

COLUMNS = ("B1", "B2", "B3", "B4", "RL")


@dataclass(frozen=True)
class TaskScores:
    bleu: tuple  # BLEU-1..4
    rouge_l: float
    count: int
    exact: float

    def row(self) -> List[float]:
        return list(self.bleu) + [self.rouge_l]


@dataclass
class EvaluationReport:
    scores: Dict[str, TaskScores] = field(default_factory=dict)
    generations: Dict[str, List[Generation]] = field(default_factory=dict)

    def rows(self, label: str = "") -> List[str]:
        lines = []
        for task in ("qa", "qg"):
            if task in self.scores:
                values = " ".join(f"{100 * v:6.2f}" for v in self.scores[task].row())
                lines.append(f"{label:<16} {task.upper():<3} {values}")
        return lines


def format_reports(reports: Mapping[str, EvaluationReport]) -> str:
    """Side-by-side table, one row per model and task, scores in percent."""
    header = f"{'model':<16} {'':<3} " + " ".join(f"{c:>6}" for c in COLUMNS)
    lines = [header]
    for label, report in reports.items():
        lines.extend(report.rows(label))
    return "\n".join(lines) + "\n"


def score_generations(
    candidates: Sequence[Sequence[str]],
    references: Sequence[Sequence[str]],
    corpus_level: bool = False,
    rouge_beta: float = 1.0,
) -> TaskScores:
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidates for {len(references)} references")
    if not candidates:
        raise ValueError("nothing to score")
    if corpus_level:
        bleus = tuple(corpus_bleu(candidates, references, n) for n in range(1, 5))
    else:
        bleus = tuple(
            float(numpy.mean([bleu(c, r, n) for c, r in zip(candidates, references)])) for n in range(1, 5)
        )
    rouge = float(numpy.mean([rouge_l(c, r, rouge_beta) for c, r in zip(candidates, references)]))
    exact = float(numpy.mean([list(c) == list(r) for c, r in zip(candidates, references)]))
    return TaskScores(bleus, rouge, len(candidates), exact)


def evaluate_model(
    model: DualModel,
    triplets: Sequence[Triplet],
    corpus_level: bool = False,
    rouge_beta: float = 1.0,
    tasks: Optional[Sequence[str]] = None,
    return_attention: bool = False,
) -> EvaluationReport:
    """Greedy-decode every enabled task from the gold counterpart and score it."""
    report = EvaluationReport()
    for task in tasks or model.tasks:
        target = WIRING[task].target
        generations = [generate_for(model, t, task, return_attention=return_attention) for t in triplets]
        references = [getattr(t, f"{target}_tokens") for t in triplets]
        report.scores[task] = score_generations(
            [g.tokens for g in generations], references, corpus_level, rouge_beta
        )
        report.generations[task] = generations
        logger.info("%s: exact match %.3f over %d triplets", task, report.scores[task].exact, len(triplets))
    return report
