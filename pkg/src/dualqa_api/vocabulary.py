"""Word and character inventories, and the word-vector file reader."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy

from tensor_api.init import Seed, as_generator, fan_avg_limit

logger = logging.getLogger(__name__)

PAD, UNK, START, END = 0, 1, 2, 3
SPECIAL_TOKENS = ("<PAD>", "<UNK>", "<START>", "<END>")
PAD_TOKEN, UNK_TOKEN, START_TOKEN, END_TOKEN = SPECIAL_TOKENS


class EmbeddingFileError(ValueError):
    """Malformed line in a word-vector text file."""


class Vocabulary:
    """Bijection between tokens and ids; ids 0-3 are PAD, UNK, START, END."""

    def __init__(self, tokens: Iterable[str] = (), min_count: int = 1):
        self.min_count = min_count
        self._id_to_token: List[str] = list(SPECIAL_TOKENS)
        self._token_to_id: Dict[str, int] = {t: i for i, t in enumerate(SPECIAL_TOKENS)}
        for token in tokens:
            if token in self._token_to_id:
                raise ValueError(f"Token '{token}' already exists.")
            self._token_to_id[token] = len(self._id_to_token)
            self._id_to_token.append(token)

    def __len__(self) -> int:
        return len(self._id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self._token_to_id

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._id_to_token == other._id_to_token

    def id(self, token: str) -> int:
        return self._token_to_id.get(token, UNK)

    def token(self, index: int) -> str:
        return self._id_to_token[index]

    def ids(self, tokens: Sequence[str]) -> numpy.ndarray:
        return numpy.array([self.id(t) for t in tokens], dtype=numpy.int64)

    @property
    def words(self) -> List[str]:
        """Non-special tokens in id order."""
        return self._id_to_token[len(SPECIAL_TOKENS):]

    def to_text(self) -> str:
        return "\n".join(self.words)

    @classmethod
    def from_text(cls, text: str, min_count: int = 1) -> "Vocabulary":
        return cls([line for line in text.split("\n") if line], min_count=min_count)


def build_vocabulary(corpus: Iterable[Sequence[str]], min_count: int = 5) -> Vocabulary:
    """Keep tokens seen at least ``min_count`` times, most frequent first, ties lexicographic."""
    counts = Counter(token for sequence in corpus for token in sequence if token not in SPECIAL_TOKENS)
    kept = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    return Vocabulary(kept, min_count=min_count)


class CharTable:
    """Printable ASCII characters; id 0 pads, id 1 stands for any other character."""

    PAD_CHAR = 0
    UNKNOWN_CHAR = 1

    def __init__(self, max_word_length: int = 16):
        self.max_word_length = max_word_length
        self._ids = {chr(c): c - 32 + 2 for c in range(32, 127)}

    def __len__(self) -> int:
        return len(self._ids) + 2

    def word_ids(self, token: str) -> numpy.ndarray:
        """Character ids truncated or padded to ``max_word_length``; specials are all padding."""
        out = numpy.zeros(self.max_word_length, dtype=numpy.int64)
        if token in SPECIAL_TOKENS:
            return out
        for i, ch in enumerate(token[: self.max_word_length]):
            out[i] = self._ids.get(ch, self.UNKNOWN_CHAR)
        return out

    def sequence_ids(self, tokens: Sequence[str]) -> numpy.ndarray:
        if not tokens:
            return numpy.zeros((0, self.max_word_length), dtype=numpy.int64)
        return numpy.stack([self.word_ids(t) for t in tokens])


@dataclass
class WordEmbeddingTable:
    matrix: numpy.ndarray  # |V| x d_word
    update_mask: numpy.ndarray  # same shape; 1 where the optimizer may move the entry
    found: int


def initial_word_table(vocab: Vocabulary, d_word: int, seed: Seed = None) -> WordEmbeddingTable:
    """Fan-average rows everywhere, PAD zero; only UNK/START/END rows trainable."""
    rng = as_generator(seed)
    limit = fan_avg_limit(len(vocab), d_word)
    matrix = rng.uniform(-limit, limit, size=(len(vocab), d_word))
    matrix[PAD] = 0.0
    mask = numpy.zeros_like(matrix)
    mask[[UNK, START, END]] = 1.0
    return WordEmbeddingTable(matrix, mask, found=0)


def load_word_embeddings(
    path: Union[str, Path], vocab: Vocabulary, d_word: int, seed: Seed = None
) -> WordEmbeddingTable:
    """Fill vocabulary rows from a ``word v1 v2 ...`` text file.

    Rows found in the file take the file vector; vocabulary words missing
    from it keep a fixed fan-average row. Both are frozen.
    """
    table = initial_word_table(vocab, d_word, seed)
    found = set()
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            parts = line.rstrip("\n").split(" ")
            if not parts or parts == [""]:
                continue
            word, values = parts[0], [p for p in parts[1:] if p]
            if len(values) != d_word:
                raise EmbeddingFileError(f"line {lineno}: expected {d_word} floats, found {len(values)}")
            if word in SPECIAL_TOKENS or word not in vocab:
                continue
            try:
                table.matrix[vocab.id(word)] = numpy.array(values, dtype=numpy.float64)
            except ValueError:
                raise EmbeddingFileError(f"line {lineno}: non-numeric value") from None
            found.add(word)
    missing = len(vocab.words) - len(found)
    if missing:
        logger.warning("%d vocabulary word(s) missing from %s keep fixed random vectors", missing, path)
    table.found = len(found)
    return table


def extend_with_context(vocab: Vocabulary, context: Sequence[str]) -> Tuple[numpy.ndarray, List[str]]:
    """Extended ids for context tokens; out-of-vocabulary words get ``len(vocab) + j``."""
    oov: List[str] = []
    ids = []
    for token in context:
        if token in vocab:
            ids.append(vocab.id(token))
        else:
            if token not in oov:
                oov.append(token)
            ids.append(len(vocab) + oov.index(token))
    return numpy.array(ids, dtype=numpy.int64), oov


def target_ids(vocab: Vocabulary, tokens: Sequence[str], oov: Sequence[str]) -> numpy.ndarray:
    """Gold ids on the extended space; unknown, uncopyable tokens become UNK."""
    out = []
    for token in tokens:
        if token in vocab:
            out.append(vocab.id(token))
        elif token in oov:
            out.append(len(vocab) + list(oov).index(token))
        else:
            out.append(UNK)
    return numpy.array(out, dtype=numpy.int64)


def surface(vocab: Vocabulary, index: int, oov: Sequence[str]) -> str:
    return vocab.token(index) if index < len(vocab) else oov[index - len(vocab)]
