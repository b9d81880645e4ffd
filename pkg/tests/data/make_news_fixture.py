"""Build the desk-scale news corpus used when 20 Newsgroups is not cached.

Source: NewsArticles.csv bundled in the tmtoolkit 0.12.0 wheel
(``pip download tmtoolkit==0.12.0 --no-deps``).  Preprocessing mirrors
``sparsetopic.datasets.load_20newsgroups``: lowercase alphabetic tokens of
length >= 3, scikit-learn English stop words removed, terms seen fewer than
5 times dropped, the 2000 most frequent kept.  One document per article.

    python make_news_fixture.py path/to/tmtoolkit-0.12.0-py3-none-any.whl
"""

import csv
import io
import re
import sys
import zipfile
from pathlib import Path

from sklearn.feature_extraction.text import ENGLISH_STOP_WORDS

from sparsetopic.corpus import build_corpus, tokenize, write_bow

HERE = Path(__file__).resolve().parent
WORD = re.compile(r"^[a-z]{3,}$")


def main(wheel):
    outer = zipfile.ZipFile(wheel)
    inner = zipfile.ZipFile(io.BytesIO(outer.read("tmtoolkit/data/en/NewsArticles.zip")))
    with inner.open("NewsArticles.csv") as raw:
        rows = list(csv.DictReader(io.TextIOWrapper(raw, encoding="utf-8")))
    lines = []
    for row in rows:
        text = re.sub(r"[^A-Za-z]+", " ", row["text"] or "")
        lines.append([t for t in tokenize(text) if WORD.match(t) and t not in ENGLISH_STOP_WORDS])
    corpus = build_corpus([ln for ln in lines if ln], min_count=5, max_vocab=2000)
    write_bow(corpus, HERE / "news.bow", HERE / "news.vocab")
    print(f"{len(corpus)} documents, |V| = {len(corpus.vocab)}, {corpus.n_tokens} tokens")


if __name__ == "__main__":
    main(sys.argv[1])
