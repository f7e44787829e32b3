"""Text cleaning, token vocabularies and pretrained-vector embedding tables."""

from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .rng import fnv1a_64, stream

LOGGER = logging.getLogger(__name__)

PAD = "<pad>"
UNK = "<unk>"
PAD_INDEX = 0
UNK_INDEX = 1
INIT_RANGE = 0.25

_PUNCT = re.compile(r"[^\w\s]|_")
_DIGITS = re.compile(r"\d")


@dataclass(frozen=True)
class PrepProfile:
    remove_stopwords: bool
    max_len: int
    strip_digits: bool = True
    strip_punct: bool = True
    max_word_len: int = 30

    def __post_init__(self):
        if self.max_len <= 0 or self.max_word_len <= 0:
            raise ValueError("max_len and max_word_len must be positive")


def description_profile() -> PrepProfile:
    return PrepProfile(remove_stopwords=True, max_len=300, strip_digits=True, strip_punct=True, max_word_len=30)


def title_profile() -> PrepProfile:
    return PrepProfile(remove_stopwords=False, max_len=57, strip_digits=True, strip_punct=True, max_word_len=30)


PROFILES = {"description": description_profile, "title": title_profile}


def read_stopwords(path: str | Path) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        return frozenset(w.strip().lower() for w in fh if w.strip())


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    """The bundled English list (``data/stopwords_en.txt``)."""
    with resources.files("latefuse").joinpath("data/stopwords_en.txt").open(encoding="utf-8") as fh:
        return frozenset(w.strip() for w in fh if w.strip())


def clean_text(text: str, profile: PrepProfile, stopwords: frozenset[str] | None = None) -> list[str]:
    text = text.lower()
    if profile.strip_punct:
        text = _PUNCT.sub(" ", text)
    if profile.strip_digits:
        text = _DIGITS.sub(" ", text)
    tokens = [t for t in text.split() if len(t) <= profile.max_word_len]
    if profile.remove_stopwords:
        stop = default_stopwords() if stopwords is None else stopwords
        tokens = [t for t in tokens if t not in stop]
    return tokens[: profile.max_len]


@dataclass(frozen=True)
class TokenVocab:
    tokens: tuple[str, ...]  # position == index; 0 is padding, 1 is unknown

    def __post_init__(self):
        if self.tokens[:2] != (PAD, UNK):
            raise ValueError("token vocab must start with padding and unknown")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("duplicate token")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.tokens)}

    @property
    def real_tokens(self) -> tuple[str, ...]:
        return self.tokens[2:]

    @property
    def tokens_hash(self) -> str:
        return f"{fnv1a_64(chr(10).join(self.tokens).encode('utf-8')):016x}"


def build_token_vocab(corpus: Iterable[Sequence[str]], min_freq: int = 1) -> TokenVocab:
    if min_freq < 1:
        raise ValueError("min_freq must be >= 1")
    freq: Counter[str] = Counter()
    for tokens in corpus:
        freq.update(tokens)
    kept = sorted(t for t, n in freq.items() if n >= min_freq and t not in (PAD, UNK))
    return TokenVocab((PAD, UNK, *kept))


def write_token_vocab(vocab: TokenVocab, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, token in enumerate(vocab.tokens):
            fh.write(f"{i}\t{token}\n")


def read_token_vocab(path: str | Path) -> TokenVocab:
    tokens = []
    with open(path, encoding="utf-8") as fh:
        for expected, line in enumerate(fh):
            idx, token = line.rstrip("\n").split("\t", 1)
            if int(idx) != expected:
                raise ValueError(f"{path}: token indices must be contiguous from 0")
            tokens.append(token)
    return TokenVocab(tuple(tokens))


def load_pretrained_vectors(path: str | Path, dim: int) -> tuple[dict[str, np.ndarray], int]:
    """Parse a ``token v1 ... vD`` text file.

    Returns the vectors (tokens lowercased, first occurrence wins) and the
    number of malformed lines that were skipped.
    """
    vectors: dict[str, np.ndarray] = {}
    malformed = 0
    with open(path, encoding="utf-8", errors="replace") as fh:
        for line in fh:
            parts = line.rstrip("\n").split(" ")
            parts = [p for p in parts if p]
            if len(parts) != dim + 1:
                malformed += 1
                continue
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError:
                malformed += 1
                continue
            if not np.all(np.isfinite(vec)):
                malformed += 1
                continue
            vectors.setdefault(parts[0].lower(), vec)
    if malformed:
        LOGGER.warning("%s: skipped %d malformed line(s)", path, malformed)
    return vectors, malformed


@dataclass(frozen=True)
class EmbeddingTable:
    matrix: np.ndarray  # V x D
    covered: np.ndarray  # V bools, True where the row came from pretrained vectors

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def init_embedding_table(vocab: TokenVocab, pretrained: dict[str, np.ndarray], dim: int, seed: int) -> EmbeddingTable:
    for vec in pretrained.values():
        if len(vec) != dim:
            raise ValueError(f"pretrained vectors have dimension {len(vec)}, expected {dim}")
        break
    rng = stream(seed, "embedding")
    # draw every row up front so coverage never shifts the random stream
    matrix = rng.uniform(-INIT_RANGE, INIT_RANGE, size=(len(vocab), dim))
    covered = np.zeros(len(vocab), dtype=bool)
    for i, token in enumerate(vocab.tokens):
        if i >= 2 and token in pretrained:
            matrix[i] = pretrained[token]
            covered[i] = True
    matrix[PAD_INDEX] = 0.0
    return EmbeddingTable(matrix, covered)


def coverage_ratio(vocab: TokenVocab, pretrained: dict[str, np.ndarray]) -> float:
    real = vocab.real_tokens
    if not real:
        return 0.0
    return sum(t in pretrained for t in real) / len(real)


def encode_sequence(tokens: Sequence[str], vocab: TokenVocab, max_len: int, index: dict[str, int] | None = None) -> np.ndarray:
    if max_len <= 0:
        raise ValueError("max_len must be positive")
    index = vocab.index if index is None else index
    out = np.full(max_len, PAD_INDEX, dtype=np.int64)
    ids = [index.get(t, UNK_INDEX) for t in tokens[:max_len]]
    out[: len(ids)] = ids
    return out


def encode_corpus(token_lists: Sequence[Sequence[str]], vocab: TokenVocab, max_len: int) -> np.ndarray:
    index = vocab.index
    out = np.zeros((len(token_lists), max_len), dtype=np.int64)
    for i, tokens in enumerate(token_lists):
        out[i] = encode_sequence(tokens, vocab, max_len, index)
    return out
