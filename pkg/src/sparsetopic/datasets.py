"""Synthetic planted-topic corpora and loaders for real text collections."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .corpus import BowDocument, Corpus, Vocabulary, build_corpus, tokenize

log = logging.getLogger(__name__)

__all__ = ["PlantedCorpus", "planted_corpus", "load_20newsgroups"]


@dataclass
class PlantedCorpus:
    corpus: Corpus
    topic_words: list[np.ndarray]  # term ids of each planted topic
    doc_topics: list[np.ndarray]  # planted topics used by each document
    doc_weights: list[np.ndarray]


def planted_corpus(n_topics: int = 5, words_per_topic: int = 20, n_docs: int = 2000,
                   doc_length: int = 15, max_topics_per_doc: int = 2,
                   seed: int = 0) -> PlantedCorpus:
    """Documents drawn from topics with disjoint, uniform word supports.

    Each document mixes 1..``max_topics_per_doc`` distinct topics with
    Dirichlet(1) weights.  Term ``k * words_per_topic + i`` belongs to topic k.
    """
    rng = np.random.default_rng(seed)
    n_terms = n_topics * words_per_topic
    vocab = Vocabulary(tuple(f"w{i:03d}" for i in range(n_terms)))
    topic_words = [np.arange(k * words_per_topic, (k + 1) * words_per_topic)
                   for k in range(n_topics)]
    docs, doc_topics, doc_weights = [], [], []
    for _ in range(n_docs):
        m = int(rng.integers(1, max_topics_per_doc + 1))
        topics = np.sort(rng.choice(n_topics, size=m, replace=False))
        weights = rng.dirichlet(np.ones(m))
        z = rng.choice(topics, size=doc_length, p=weights)
        tokens = z * words_per_topic + rng.integers(0, words_per_topic, size=doc_length)
        docs.append(BowDocument.from_ids(tokens))
        doc_topics.append(topics)
        doc_weights.append(weights)
    return PlantedCorpus(Corpus(tuple(docs), vocab), topic_words, doc_topics, doc_weights)


def load_20newsgroups(n_docs: int = 5000, vocab_size: int = 2000, min_count: int = 5,
                      data_home=None, seed: int = 0) -> Corpus:
    """A desk-scale 20 Newsgroups subset from scikit-learn's local cache.

    Nothing is downloaded; ``FileNotFoundError``/``OSError`` propagates when
    the cache is absent.  Tokens are lowercase alphabetic strings of length
    >= 3 with scikit-learn's English stop words removed.
    """
    import re

    from sklearn.datasets import fetch_20newsgroups
    from sklearn.feature_extraction.text import ENGLISH_STOP_WORDS

    data = fetch_20newsgroups(subset="all", remove=("headers", "footers", "quotes"),
                              data_home=data_home, download_if_missing=False)
    word = re.compile(r"^[a-z]{3,}$")
    lines = [[t for t in tokenize(text.replace("\n", " "))
              if word.match(t) and t not in ENGLISH_STOP_WORDS] for text in data.data]
    lines = [ln for ln in lines if ln]
    rng = np.random.default_rng(seed)
    pick = np.sort(rng.choice(len(lines), size=min(n_docs, len(lines)), replace=False))
    return build_corpus([lines[i] for i in pick], min_count=min_count, max_vocab=vocab_size)
