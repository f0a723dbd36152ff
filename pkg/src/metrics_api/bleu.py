"""BLEU-1..4 with clipped n-gram precision and brevity penalty, no smoothing.

Counting and the geometric mean come from ``nltk.translate.bleu_score``.
Any zero n-gram precision gives a score of exactly 0.
"""

from __future__ import annotations

from collections import Counter
from typing import Sequence, Tuple

from nltk.translate.bleu_score import corpus_bleu as _nltk_corpus_bleu
from nltk.translate.bleu_score import modified_precision
from nltk.util import ngrams as _ngrams

Tokens = Sequence[str]


def ngrams(tokens: Tokens, n: int) -> Counter:
    return Counter(_ngrams(list(tokens), n))


def _weights(max_n: int) -> Tuple[float, ...]:
    if max_n < 1:
        raise ValueError("max_n must be at least 1")
    return (1.0 / max_n,) * max_n


def _has_zero_precision(pairs, max_n: int) -> bool:
    for n in range(1, max_n + 1):
        if all(modified_precision([list(ref)], list(cand), n) == 0 for cand, ref in pairs):
            return True
    return False


def bleu(candidate: Tokens, reference: Tokens, max_n: int = 4) -> float:
    """Sentence BLEU against a single reference.

    >>> round(bleu(["the", "cat"], ["the", "cat", "sat"], max_n=1), 4)
    0.6065
    """
    return corpus_bleu([candidate], [reference], max_n)


def corpus_bleu(candidates: Sequence[Tokens], references: Sequence[Tokens], max_n: int = 4) -> float:
    """BLEU with n-gram counts and lengths pooled over the corpus."""
    weights = _weights(max_n)
    if len(candidates) != len(references):
        raise ValueError("candidates and references differ in length")
    pairs = list(zip(candidates, references))
    if not pairs or _has_zero_precision(pairs, max_n):
        return 0.0
    return float(
        _nltk_corpus_bleu([[list(ref)] for _, ref in pairs], [list(cand) for cand, _ in pairs], weights=weights)
    )
