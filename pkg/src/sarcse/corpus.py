"""Tokenization, vocabulary and token-frequency construction, dataset
readers, and padded batching."""

from __future__ import annotations

import hashlib
import string
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
RESERVED = (PAD_TOKEN, UNK_TOKEN)

# Largest TextCNN kernel; every sentence is padded to at least this length.
MIN_SENTENCE_LEN = 5

_PUNCT = set(string.punctuation)


def tokenize(text: str) -> list[str]:
    """Lowercase whitespace tokenizer that peels leading/trailing punctuation."""
    tokens: list[str] = []
    for piece in text.lower().split():
        lead: list[str] = []
        while piece and piece[0] in _PUNCT:
            lead.append(piece[0])
            piece = piece[1:]
        trail: list[str] = []
        while piece and piece[-1] in _PUNCT:
            trail.append(piece[-1])
            piece = piece[:-1]
        tokens.extend(lead)
        if piece:
            tokens.append(piece)
        tokens.extend(reversed(trail))
    return tokens


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class Vocab:
    """Token/id mapping with PAD=0 and UNK=1 reserved."""

    tokens: list[str]                      # non-reserved tokens, id = index + 2
    corpus_sha256: str | None = None
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self._index = {tok: i + len(RESERVED) for i, tok in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens) + len(RESERVED)

    def id_of(self, token: str) -> int:
        return self._index.get(token, UNK_ID)

    def token_of(self, idx: int) -> str:
        if idx < len(RESERVED):
            return RESERVED[idx]
        return self.tokens[idx - len(RESERVED)]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.id_of(t) for t in tokens]


def load_corpus(path: str | Path) -> list[str]:
    """Read a one-sentence-per-line corpus, skipping blank lines."""
    with open(path, "r", encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def build_vocab(corpus_path: str | Path, min_count: int = 1) -> Vocab:
    """Count corpus tokens and keep those with count >= min_count.

    Tokens are ordered by descending count, ties broken lexicographically,
    which makes the vocabulary deterministic for a given corpus.
    """
    if min_count < 1:
        raise ValueError(f"build_vocab: min_count must be >= 1, got {min_count}")
    counts: dict[str, int] = {}
    for sentence in load_corpus(corpus_path):
        for tok in tokenize(sentence):
            counts[tok] = counts.get(tok, 0) + 1
    if not counts:
        raise ValueError(f"build_vocab: empty corpus {corpus_path}")
    kept = [t for t, c in counts.items() if c >= min_count]
    if not kept:
        raise ValueError(f"build_vocab: empty vocabulary (min_count={min_count})")
    kept.sort(key=lambda t: (-counts[t], t))
    return Vocab(kept, corpus_sha256=file_sha256(corpus_path))


@dataclass
class FrequencyTable:
    """Per-vocab-id share of all corpus token occurrences.

    UNK absorbs out-of-vocabulary occurrences, so the table sums to 1 over
    ids >= 1 for any corpus; PAD never occurs and stays at 0.
    """

    freq: np.ndarray    # float64, length == len(vocab)

    def of_id(self, idx: int) -> float:
        return float(self.freq[idx])


def token_frequency(corpus_path: str | Path, vocab: Vocab) -> FrequencyTable:
    """Normalized token frequencies over the training corpus."""
    checksum = file_sha256(corpus_path)
    if vocab.corpus_sha256 is not None and vocab.corpus_sha256 != checksum:
        warnings.warn(
            f"token_frequency: corpus {corpus_path} does not match the vocabulary's "
            f"source corpus (checksum mismatch)",
            stacklevel=2,
        )
    counts = np.zeros(len(vocab), dtype=np.int64)
    for sentence in load_corpus(corpus_path):
        for tok in tokenize(sentence):
            counts[vocab.id_of(tok)] += 1
    total = counts.sum()
    if total == 0:
        raise ValueError(f"token_frequency: empty corpus {corpus_path}")
    return FrequencyTable(counts.astype(np.float64) / total)


@dataclass
class ScoredPair:
    """A sentence pair with a human similarity rating in [0, 5]."""

    gold_score: float
    sentence_a: list[str]
    sentence_b: list[str]


def load_sts_pairs(path: str | Path) -> list[ScoredPair]:
    """Read tab-separated `score\\ta\\tb` similarity pairs."""
    pairs: list[ScoredPair] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}")
            try:
                score = float(fields[0])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad score {fields[0]!r}") from exc
            if not 0.0 <= score <= 5.0:
                raise ValueError(f"{path}:{lineno}: score {score} outside [0, 5]")
            pairs.append(ScoredPair(score, tokenize(fields[1]), tokenize(fields[2])))
    return pairs


@dataclass
class SentenceBatch:
    """PAD-filled id matrix with a validity mask."""

    ids: np.ndarray        # B x L int64
    mask: np.ndarray       # B x L bool, True = real token
    lengths: np.ndarray    # B int64

    @property
    def batch_size(self) -> int:
        return self.ids.shape[0]

    @property
    def padded_len(self) -> int:
        return self.ids.shape[1]

    def token_ids(self, i: int) -> np.ndarray:
        """Un-padded id sequence of sentence `i`."""
        return self.ids[i, : self.lengths[i]]


def make_batch(
    sentences: Iterable[str],
    vocab: Vocab,
    min_len: int = MIN_SENTENCE_LEN,
) -> SentenceBatch:
    """Tokenize, id-encode, and pad a group of sentences to a common length."""
    return make_batch_tokens([tokenize(s) for s in sentences], vocab, min_len)


def make_batch_tokens(
    token_lists: Iterable[list[str]],
    vocab: Vocab,
    min_len: int = MIN_SENTENCE_LEN,
) -> SentenceBatch:
    """`make_batch` over already-tokenized sentences."""
    encoded: list[list[int]] = []
    for i, toks in enumerate(token_lists):
        if not toks:
            raise ValueError(f"make_batch: sentence {i} is empty after tokenization")
        encoded.append(vocab.encode(toks))
    if not encoded:
        raise ValueError("make_batch: no sentences")
    length = max(min_len, max(len(e) for e in encoded))
    ids = np.full((len(encoded), length), PAD_ID, dtype=np.int64)
    mask = np.zeros((len(encoded), length), dtype=bool)
    for i, e in enumerate(encoded):
        ids[i, : len(e)] = e
        mask[i, : len(e)] = True
    return SentenceBatch(ids=ids, mask=mask, lengths=mask.sum(axis=1))


# -- on-disk formats ---------------------------------------------------------


def save_vocab(vocab: Vocab, path: str | Path) -> None:
    """One non-reserved token per line; id = line number - 1 + reserved offset."""
    with open(path, "w", encoding="utf-8") as fh:
        for tok in vocab.tokens:
            fh.write(tok + "\n")


def load_vocab(path: str | Path, corpus_sha256: str | None = None) -> Vocab:
    with open(path, "r", encoding="utf-8") as fh:
        tokens = [line.rstrip("\n") for line in fh if line.rstrip("\n")]
    return Vocab(tokens, corpus_sha256=corpus_sha256)


def save_frequency(table: FrequencyTable, vocab: Vocab, path: str | Path) -> None:
    """Tab-separated `token\\tfreq` rows covering every vocab id."""
    with open(path, "w", encoding="utf-8") as fh:
        for idx in range(len(vocab)):
            fh.write(f"{vocab.token_of(idx)}\t{float(table.freq[idx])!r}\n")


def load_frequency(path: str | Path, vocab: Vocab) -> FrequencyTable:
    freq = np.zeros(len(vocab), dtype=np.float64)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 2:
                raise ValueError(f"{path}:{lineno}: expected token\\tfreq")
            if lineno - 1 >= len(vocab):
                raise ValueError(f"{path}:{lineno}: more rows than vocabulary entries")
            freq[lineno - 1] = float(fields[1])
    return FrequencyTable(freq)


def pretrained_vectors(path: str | Path) -> Iterator[tuple[str, np.ndarray]]:
    """Yield (token, vector) rows from a `token v1 v2 ... vd` text file."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected a token and at least one value")
            yield parts[0], np.array([float(v) for v in parts[1:]], dtype=np.float64)
