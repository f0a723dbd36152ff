"""Small generated corpora for overfitting and copy checks."""

from __future__ import annotations

import itertools
from typing import List, Sequence, Tuple

import numpy

from squad_connector.squad import Triplet

SYLLABLES = ("ba", "ko", "mi", "ru", "te", "sa", "lo", "ne", "di", "fu", "ga", "pe")
LETTERS = "bcdfghjklmnpqrstvwxz"


def word_list(size: int, rng: numpy.random.Generator) -> List[str]:
    """``size`` distinct two-syllable lowercase words."""
    pool = ["".join(pair) for pair in itertools.product(SYLLABLES, repeat=2)]
    if size > len(pool):
        raise ValueError(f"at most {len(pool)} synthetic words available, asked for {size}")
    return [pool[i] for i in rng.choice(len(pool), size=size, replace=False)]


def synthetic_triplets(
    count: int = 20,
    vocab_size: int = 60,
    context_range: Tuple[int, int] = (15, 25),
    seed: int = 0,
    answer_range: Tuple[int, int] = (1, 3),
    cue_only: bool = False,
) -> List[Triplet]:
    """Random contexts; the answer is a short span and the question names the two words before it.

    Questions read ``what is after w1 w2 ?``, or just ``w1 w2`` with
    ``cue_only``, in which case every target token of both tasks can be
    copied from the context.
    """
    low, high = context_range
    if low < 5 or high < low:
        raise ValueError(f"invalid context length range {context_range}")
    shortest, longest = answer_range
    if shortest < 1 or longest < shortest or longest > low - 2:
        raise ValueError(f"invalid answer length range {answer_range}")
    rng = numpy.random.default_rng(seed)
    words = word_list(vocab_size, rng)
    triplets = []
    for i in range(count):
        length = int(rng.integers(low, high + 1))
        context = [words[k] for k in rng.integers(0, len(words), size=length)]
        span = int(rng.integers(shortest, longest + 1))
        start = int(rng.integers(2, length - span + 1))
        cue = context[start - 2 : start]
        question = cue if cue_only else ["what", "is", "after"] + cue + ["?"]
        triplets.append(
            Triplet(" ".join(question), " ".join(context), " ".join(context[start : start + span]), f"syn{i}")
        )
    return triplets


def copy_triplets(count: int = 20, seed: int = 0, context_range: Tuple[int, int] = (8, 12)) -> List[Triplet]:
    """Each answer is one rare code word that occurs only in its own context.

    Built with ``min_count >= 3`` the code words stay out of the vocabulary,
    so a correct answer has to be copied from the context.
    """
    rng = numpy.random.default_rng(seed)
    words = word_list(12, rng)
    triplets = []
    for i in range(count):
        length = int(rng.integers(context_range[0], context_range[1] + 1))
        context = [words[k] for k in rng.integers(0, len(words), size=length)]
        code = "x" + "".join(rng.choice(list(LETTERS), size=4)) + str(i)
        context.insert(int(rng.integers(0, length + 1)), code)
        triplets.append(Triplet("what is the code ?", " ".join(context), code, f"copy{i}"))
    return triplets


def corpus_tokens(triplets: Sequence[Triplet]) -> List[Tuple[str, ...]]:
    """Token sequences of every field, the input to vocabulary building."""
    out = []
    for t in triplets:
        out.extend([t.context_tokens, t.question_tokens, t.answer_tokens])
    return out
