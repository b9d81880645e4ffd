"""Held-out perplexity, PMI topic coherence and topic sparsity."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Corpus, SplitDocument, Vocabulary
from .simplex import SparsePoint, softmax
from .topicmodel import NSMTM, TopicModel, _regularizer

__all__ = [
    "PERPLEXITY_MODES",
    "PerplexityReport",
    "perplexity",
    "perplexity_report",
    "unigram_perplexity",
    "CoocStats",
    "build_cooc",
    "pmi",
    "mean_pmi",
    "topic_sparsity_theta",
    "topic_sparsity_phi",
]

PERPLEXITY_MODES = ("bound_rw", "bound_kl", "predictive")


@dataclass
class PerplexityReport:
    perplexity: float
    log_likelihood: float
    n_tokens: int
    n_floored: int


def _split_counts(test: Sequence[SplitDocument], n_terms: int):
    observed = np.zeros((len(test), n_terms))
    heldout = np.zeros((len(test), n_terms))
    for r, doc in enumerate(test):
        observed[r, doc.observed.ids] = doc.observed.counts
        heldout[r, doc.heldout.ids] = doc.heldout.counts
    return observed, heldout


def perplexity_report(model: TopicModel, test: Sequence[SplitDocument],
                      mode: str = "bound_rw") -> PerplexityReport:
    """exp(-sum_j log p(w_j2 | w_j1) / sum_j |w_j2|).

    theta is inferred from the observed half with the posterior mean and the
    held-out half is scored under the decoder.  The bound modes subtract the
    document's regulariser from its log-likelihood: gamma * RW for
    ``bound_rw`` and the plain KL term for ``bound_kl``.
    """
    if mode not in PERPLEXITY_MODES:
        raise ValueError(f"mode must be one of {PERPLEXITY_MODES}")
    if not test:
        raise ValueError("empty test set")
    if any(d.heldout.length < 1 for d in test):
        raise ValueError("every held-out half must be non-empty")
    cfg = model.cfg
    observed, heldout = _split_counts(test, model.n_terms)
    mu, std = model.posterior(observed)
    theta = model.thetas(observed)
    psi = model.word_distributions(theta)
    n_floored = 0
    if cfg.variant == NSMTM:
        low = psi <= cfg.eps_floor
        n_floored = int(heldout[low].sum())
        psi = np.where(low, cfg.eps_floor, psi)
    hit = heldout > 0
    terms = heldout[hit] * np.log(psi[hit])
    if mode == "bound_rw":
        reg = cfg.gamma * _regularizer(cfg.replace(regularizer="rw"), mu, std)
    elif mode == "bound_kl":
        reg = _regularizer(cfg.replace(regularizer="kl"), mu, std)
    else:
        reg = np.zeros(0)
    # compensated sums keep the result independent of document order
    total = math.fsum(terms) - math.fsum(reg)
    n_tokens = int(heldout.sum())
    return PerplexityReport(float(np.exp(-total / n_tokens)), total, n_tokens, n_floored)


def perplexity(model: TopicModel, test: Sequence[SplitDocument], mode: str = "bound_rw") -> float:
    return perplexity_report(model, test, mode).perplexity


def unigram_perplexity(train: Corpus, test: Sequence[SplitDocument], smoothing: float = 1.0) -> float:
    """Baseline: held-out tokens scored by add-``smoothing`` training frequencies."""
    freq = train.term_frequencies() + smoothing
    logp = np.log(freq / freq.sum())
    total = math.fsum(x for d in test for x in logp[d.heldout.ids] * d.heldout.counts)
    n_tokens = sum(d.heldout.length for d in test)
    return float(np.exp(-total / n_tokens))


@dataclass(frozen=True)
class CoocStats:
    """Document-level occurrence counts.

    ``pair_freq`` is a dense symmetric (|V|, |V|) matrix; its diagonal equals
    ``doc_freq``.
    """

    doc_freq: np.ndarray
    pair_freq: np.ndarray
    n_docs: int
    vocab: Vocabulary | None = None

    def term_id(self, term) -> int:
        if isinstance(term, (int, np.integer)):
            if not 0 <= term < self.doc_freq.size:
                raise KeyError(f"term id {term} out of range")
            return int(term)
        if self.vocab is None:
            raise KeyError("string terms need a vocabulary")
        return self.vocab.lookup(term)


def build_cooc(corpus: Corpus, chunk: int = 2048) -> CoocStats:
    """Binary document-term incidence and its Gram matrix."""
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    n_terms = len(corpus.vocab)
    doc_freq = np.zeros(n_terms, dtype=np.int64)
    pair = np.zeros((n_terms, n_terms), dtype=np.int64)
    for start in range(0, len(corpus), chunk):
        docs = corpus.docs[start:start + chunk]
        inc = np.zeros((len(docs), n_terms), dtype=np.float64)
        for r, d in enumerate(docs):
            inc[r, d.ids] = 1.0
        doc_freq += inc.sum(0).astype(np.int64)
        pair += np.rint(inc.T @ inc).astype(np.int64)
    return CoocStats(doc_freq, pair, len(corpus), corpus.vocab)


def pmi(stats: CoocStats, top_terms: Sequence) -> float:
    """Average pairwise PMI of a topic's top-N terms (natural log).

    p(w_i, w_j) = (pair_freq + 1) / (n_docs + 1), p(w) = doc_freq / n_docs.
    """
    ids = [stats.term_id(t) for t in top_terms]
    if len(ids) < 2:
        raise ValueError("PMI needs at least two terms")
    if len(set(ids)) != len(ids):
        raise ValueError("top terms must be distinct")
    n = stats.n_docs
    marg = stats.doc_freq / n
    if np.any(marg[ids] == 0):
        raise ValueError("a top term never occurs in the reference corpus")
    scores = []
    for a, b in itertools.combinations(ids, 2):
        joint = (stats.pair_freq[a, b] + 1.0) / (n + 1.0)
        scores.append(np.log(joint / (marg[a] * marg[b])))
    return float(np.mean(scores))


def mean_pmi(model: TopicModel, stats: CoocStats, top_n: int = 15) -> tuple[float, list[float]]:
    """Mean PMI over topics; the per-topic scores are returned too.

    Top words that never occur in the reference corpus are skipped.
    """
    from .topicmodel import top_words

    scores = []
    for k in range(model.cfg.n_topics):
        words = [w for w, _ in top_words(model, k, top_n) if stats.doc_freq[model.vocab.lookup(w)] > 0]
        scores.append(pmi(stats, [model.vocab.lookup(w) for w in words]) if len(words) >= 2 else 0.0)
    return float(np.mean(scores)), scores


def topic_sparsity_theta(theta, K: int | None = None) -> float:
    """Fraction of exactly-zero topic proportions."""
    values = theta.values if isinstance(theta, SparsePoint) else np.asarray(theta)
    K = values.shape[-1] if K is None else K
    if values.shape[-1] != K:
        raise ValueError(f"theta has {values.shape[-1]} entries, expected {K}")
    return float(np.mean(np.count_nonzero(values == 0, axis=-1)) / K)


def topic_sparsity_phi(phi_row, n_terms: int | None = None, threshold: float = 0.0,
                       normalize: bool = False) -> float:
    """Fraction of topic-word entries at or below ``threshold``.

    With ``normalize`` the row is softmax-normalised first (NSMDM rows are
    unnormalised scores).
    """
    row = np.asarray(phi_row, dtype=np.float64)
    if normalize:
        row = softmax(row)
    n_terms = row.shape[-1] if n_terms is None else n_terms
    if row.shape[-1] != n_terms:
        raise ValueError(f"phi row has {row.shape[-1]} entries, expected {n_terms}")
    zero = row == 0 if threshold == 0.0 else row <= threshold
    return np.count_nonzero(zero, axis=-1) / n_terms
