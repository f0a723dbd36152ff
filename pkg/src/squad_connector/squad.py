"""Reading and writing question-context-answer triplets in SQuAD layout.

The layout is ``{"data": [article, ...]}`` where every article holds
``paragraphs``, every paragraph a ``context`` string and a list of ``qas``,
and every qa a ``question``, an ``id`` and a list of ``answers`` with
``text``. One triplet is produced per question, using its first answer.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

from squad_connector.tokenizer import tokenize

logger = logging.getLogger(__name__)


class SquadFormatError(ValueError):
    """Structural violation of the SQuAD layout; ``locator`` says where."""

    def __init__(self, locator: str, message: str):
        super().__init__(f"{locator}: {message}")
        self.locator = locator


@dataclass(frozen=True)
class Triplet:
    question: str
    context: str
    answer: str
    source_id: str = ""
    question_tokens: Tuple[str, ...] = field(init=False)
    context_tokens: Tuple[str, ...] = field(init=False)
    answer_tokens: Tuple[str, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "question_tokens", tuple(tokenize(self.question)))
        object.__setattr__(self, "context_tokens", tuple(tokenize(self.context)))
        object.__setattr__(self, "answer_tokens", tuple(tokenize(self.answer)))


@dataclass(frozen=True)
class SquadFile:
    triplets: List[Triplet]
    skipped: int
    skipped_at: List[str] = field(default_factory=list)


def _require(mapping, key: str, kind, locator: str):
    if not isinstance(mapping, dict):
        raise SquadFormatError(locator, "expected an object")
    if key not in mapping:
        raise SquadFormatError(locator, f"missing '{key}'")
    value = mapping[key]
    if not isinstance(value, kind):
        raise SquadFormatError(f"{locator}.{key}", f"expected {kind.__name__}")
    return value


def read_squad(path: Union[str, Path]) -> SquadFile:
    """Parse a SQuAD file.

    Questions without answers, and questions whose context, question or
    answer text has no tokens, are counted and logged with their locator
    instead of being returned.
    """
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SquadFormatError("<file>", f"invalid JSON ({exc.msg} at line {exc.lineno})") from exc

    triplets: List[Triplet] = []
    skipped_at: List[str] = []

    def skip(locator: str, reason: str) -> None:
        logger.warning("%s: %s, question skipped", locator, reason)
        skipped_at.append(locator)

    articles = _require(document, "data", list, "<root>")
    for a, article in enumerate(articles):
        article_loc = f"data[{a}]"
        for p, paragraph in enumerate(_require(article, "paragraphs", list, article_loc)):
            para_loc = f"{article_loc}.paragraphs[{p}]"
            context = _require(paragraph, "context", str, para_loc)
            for q, qa in enumerate(_require(paragraph, "qas", list, para_loc)):
                qa_loc = f"{para_loc}.qas[{q}]"
                question = _require(qa, "question", str, qa_loc)
                answers = _require(qa, "answers", list, qa_loc)
                if not answers:
                    skip(qa_loc, "no answers")
                    continue
                answer = _require(answers[0], "text", str, f"{qa_loc}.answers[0]")
                triplet = Triplet(question, context, answer, str(qa.get("id", "")))
                empty = [
                    name
                    for name, tokens in (
                        ("context", triplet.context_tokens),
                        ("question", triplet.question_tokens),
                        ("answer", triplet.answer_tokens),
                    )
                    if not tokens
                ]
                if empty:
                    skip(qa_loc, f"empty {' and '.join(empty)}")
                    continue
                triplets.append(triplet)
    if skipped_at:
        logger.warning("Skipped %d question(s) in %s", len(skipped_at), path)
    return SquadFile(triplets, len(skipped_at), skipped_at)


def parse_squad(path: Union[str, Path]) -> List[Triplet]:
    return read_squad(path).triplets


def write_squad(triplets: Sequence[Triplet], path: Union[str, Path], title: str = "triplets") -> None:
    """Write triplets as one article, one paragraph per distinct context."""
    paragraphs: Dict[str, dict] = {}
    for i, triplet in enumerate(triplets):
        paragraph = paragraphs.setdefault(triplet.context, {"context": triplet.context, "qas": []})
        start = triplet.context.find(triplet.answer)
        paragraph["qas"].append(
            {
                "id": triplet.source_id or f"q{i}",
                "question": triplet.question,
                "answers": [{"text": triplet.answer, "answer_start": max(start, 0)}],
            }
        )
    document = {"version": "1.1", "data": [{"title": title, "paragraphs": list(paragraphs.values())}]}
    Path(path).write_text(json.dumps(document, indent=1), encoding="utf-8")


@dataclass(frozen=True)
class DatasetStats:
    count: int
    mean_context_length: float
    mean_question_length: float
    mean_answer_length: float

    def to_row(self, name: str = "") -> str:
        """Columns in the order #, n, m, k."""
        return (
            f"{name:<12}{self.count:>10,d}{self.mean_context_length:>10.1f}"
            f"{self.mean_question_length:>10.1f}{self.mean_answer_length:>10.1f}"
        )

    @staticmethod
    def header() -> str:
        return f"{'Dataset':<12}{'#':>10}{'n':>10}{'m':>10}{'k':>10}"


def dataset_stats(triplets: Sequence[Triplet]) -> DatasetStats:
    if not triplets:
        raise ValueError("dataset_stats needs at least one triplet")
    count = len(triplets)
    return DatasetStats(
        count=count,
        mean_context_length=sum(len(t.context_tokens) for t in triplets) / count,
        mean_question_length=sum(len(t.question_tokens) for t in triplets) / count,
        mean_answer_length=sum(len(t.answer_tokens) for t in triplets) / count,
    )
