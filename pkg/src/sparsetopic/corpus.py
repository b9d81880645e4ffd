"""Bag-of-words corpora: vocabulary building, held-out splits and the
plain-text / ``termid:count`` file formats."""

from __future__ import annotations

import logging
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

__all__ = [
    "Vocabulary",
    "BowDocument",
    "Corpus",
    "SplitDocument",
    "EmptyCorpusError",
    "tokenize",
    "read_token_lines",
    "build_corpus",
    "corpus_from_lines",
    "split_heldout",
    "write_bow",
    "read_bow",
    "read_vocab",
    "write_token_lines",
]


class EmptyCorpusError(ValueError):
    pass


def tokenize(line: str) -> list[str]:
    return line.lower().split()


def read_token_lines(path) -> list[list[str]]:
    """One document per line, whitespace tokens, lowercased."""
    with open(path, encoding="utf-8") as fh:
        return [tokenize(line) for line in fh]


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("vocabulary must contain at least one term")
        index = {t: i for i, t in enumerate(terms)}
        if len(index) != len(terms):
            raise ValueError("vocabulary terms must be distinct")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return len(self.terms)

    def __getitem__(self, i: int) -> str:
        return self.terms[i]

    def lookup(self, term: str) -> int:
        return self.index[term]

    def __contains__(self, term: str) -> bool:
        return term in self.index


@dataclass(frozen=True)
class BowDocument:
    """Sparse term counts; ``ids`` strictly increasing, ``counts`` positive."""

    ids: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        counts = np.asarray(self.counts, dtype=np.int64)
        if ids.shape != counts.shape or ids.ndim != 1:
            raise ValueError("ids and counts must be 1-D arrays of equal length")
        if counts.size and counts.min() <= 0:
            raise ValueError("counts must be positive")
        if ids.size > 1 and np.any(np.diff(ids) <= 0):
            raise ValueError("ids must be strictly increasing")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_ids(cls, token_ids: Iterable[int]) -> "BowDocument":
        ids, counts = np.unique(np.asarray(list(token_ids), dtype=np.int64), return_counts=True)
        return cls(ids, counts)

    @property
    def length(self) -> int:
        return int(self.counts.sum())

    def as_dict(self) -> dict[int, int]:
        return {int(i): int(c) for i, c in zip(self.ids, self.counts)}

    def tokens(self) -> np.ndarray:
        """The token multiset as a flat id array (sorted)."""
        return np.repeat(self.ids, self.counts)

    def dense(self, n_terms: int) -> np.ndarray:
        out = np.zeros(n_terms)
        out[self.ids] = self.counts
        return out


@dataclass(frozen=True)
class Corpus:
    docs: tuple[BowDocument, ...]
    vocab: Vocabulary

    def __post_init__(self):
        docs = tuple(self.docs)
        n = len(self.vocab)
        for d in docs:
            if d.ids.size and d.ids[-1] >= n:
                raise ValueError("document references a term outside the vocabulary")
        object.__setattr__(self, "docs", docs)

    def __len__(self) -> int:
        return len(self.docs)

    @property
    def n_tokens(self) -> int:
        return sum(d.length for d in self.docs)

    def count_matrix(self, rows: Sequence[int] | None = None) -> np.ndarray:
        """Dense (n_docs, |V|) count matrix for the selected documents."""
        docs = self.docs if rows is None else [self.docs[i] for i in rows]
        out = np.zeros((len(docs), len(self.vocab)))
        for r, d in enumerate(docs):
            out[r, d.ids] = d.counts
        return out

    def term_frequencies(self) -> np.ndarray:
        freq = np.zeros(len(self.vocab))
        for d in self.docs:
            freq[d.ids] += d.counts
        return freq


@dataclass(frozen=True)
class SplitDocument:
    observed: BowDocument
    heldout: BowDocument

    def merged(self) -> BowDocument:
        return BowDocument.from_ids(
            np.concatenate([self.observed.tokens(), self.heldout.tokens()])
        )


def _select_vocab(counter: Counter, min_count: int, max_vocab: int | None) -> list[str]:
    kept = [(t, c) for t, c in counter.items() if c >= min_count]
    kept.sort(key=lambda tc: (-tc[1], tc[0]))
    if max_vocab is not None:
        kept = kept[:max_vocab]
    return [t for t, _ in kept]


def corpus_from_lines(lines: Iterable[Sequence[str]], vocab: Vocabulary) -> tuple[Corpus, int, int]:
    """Map token lines onto an existing vocabulary.

    Unknown tokens and documents left empty are dropped.  Returns the
    corpus plus (dropped documents, dropped tokens).
    """
    docs = []
    dropped_docs = dropped_tokens = 0
    for tokens in lines:
        ids = [vocab.index[t] for t in tokens if t in vocab.index]
        dropped_tokens += len(tokens) - len(ids)
        if not ids:
            dropped_docs += 1
            continue
        docs.append(BowDocument.from_ids(ids))
    return Corpus(tuple(docs), vocab), dropped_docs, dropped_tokens


def build_corpus(lines: Sequence[Sequence[str]], min_count: int = 1,
                 max_vocab: int | None = None) -> Corpus:
    """Build a vocabulary from global term counts and encode every line.

    Terms are ordered by descending frequency with lexicographic tie-breaks,
    so ids do not depend on document order.
    """
    if not lines:
        raise ValueError("no input documents")
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counter = Counter()
    for tokens in lines:
        counter.update(tokens)
    terms = _select_vocab(counter, min_count, max_vocab)
    if not terms:
        raise EmptyCorpusError("every document is empty after vocabulary filtering")
    corpus, dropped, _ = corpus_from_lines(lines, Vocabulary(tuple(terms)))
    if not corpus.docs:
        raise EmptyCorpusError("every document is empty after vocabulary filtering")
    if dropped:
        log.info("dropped %d documents that were empty after filtering", dropped)
    return corpus


def split_heldout(corpus: Corpus, test_fraction: float = 0.1,
                  seed: int = 0) -> tuple[Corpus, list[SplitDocument]]:
    """Hold out a random fraction of documents and halve each one token-wise.

    Test documents are drawn among those with at least two tokens so both
    halves are non-empty.  Within a test document the token multiset is
    shuffled and dealt alternately to the observed and held-out halves.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    n = len(corpus)
    if n < 2:
        raise ValueError("need at least two documents to split")
    eligible = np.array([i for i, d in enumerate(corpus.docs) if d.length >= 2])
    n_test = int(np.floor(test_fraction * n + 0.5))
    n_test = min(max(n_test, 1), n - 1, eligible.size)
    if n_test < 1:
        raise ValueError("no document has the two tokens needed for a split")

    rng = np.random.default_rng(seed)
    test_idx = np.sort(rng.choice(eligible, size=n_test, replace=False))
    is_test = np.zeros(n, dtype=bool)
    is_test[test_idx] = True

    train = Corpus(tuple(d for d, t in zip(corpus.docs, is_test) if not t), corpus.vocab)
    test = []
    for i in test_idx:
        tokens = rng.permutation(corpus.docs[i].tokens())
        test.append(SplitDocument(BowDocument.from_ids(tokens[0::2]),
                                  BowDocument.from_ids(tokens[1::2])))
    return train, test


def write_bow(corpus: Corpus, bow_path, vocab_path) -> None:
    """Write ``termid:count`` lines plus a one-term-per-line vocabulary."""
    with open(vocab_path, "w", encoding="utf-8", newline="\n") as fh:
        for term in corpus.vocab.terms:
            fh.write(term + "\n")
    with open(bow_path, "w", encoding="utf-8", newline="\n") as fh:
        for d in corpus.docs:
            fh.write(" ".join(f"{i}:{c}" for i, c in zip(d.ids, d.counts)) + "\n")


def write_token_lines(corpus: Corpus, path) -> None:
    """Plain-text form: each document's tokens in term-id order."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in corpus.docs:
            fh.write(" ".join(corpus.vocab.terms[i] for i in d.tokens()) + "\n")


def read_vocab(vocab_path) -> Vocabulary:
    with open(vocab_path, encoding="utf-8") as fh:
        return Vocabulary(tuple(line.rstrip("\n") for line in fh if line.rstrip("\n")))


def read_bow(bow_path, vocab_path) -> Corpus:
    vocab = read_vocab(vocab_path)
    docs = []
    with open(bow_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            entries = line.split()
            if not entries:
                continue
            try:
                pairs = sorted((int(a), int(b)) for a, b in (e.split(":") for e in entries))
            except ValueError as exc:
                raise ValueError(f"{os.fspath(bow_path)}:{lineno}: malformed entry") from exc
            docs.append(BowDocument([p[0] for p in pairs], [p[1] for p in pairs]))
    return Corpus(tuple(docs), vocab)
