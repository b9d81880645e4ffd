import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsetopic.corpus import (
    BowDocument,
    Corpus,
    EmptyCorpusError,
    Vocabulary,
    build_corpus,
    read_bow,
    read_token_lines,
    split_heldout,
    tokenize,
    write_bow,
)

words = st.sampled_from(list("abcdefgh"))
docs_strategy = st.lists(st.lists(words, min_size=1, max_size=12), min_size=2, max_size=30)


def test_single_document_counts():
    c = build_corpus([["a", "b", "a"]], min_count=1, max_vocab=10)
    assert len(c.vocab) == 2
    assert len(c) == 1
    assert {c.vocab[i]: n for i, n in c.docs[0].as_dict().items()} == {"a": 2, "b": 1}
    assert c.docs[0].length == 3


def test_min_count_filter():
    c = build_corpus([["a", "b"], ["b"]], min_count=2)
    assert c.vocab.terms == ("b",)
    assert [d.as_dict() for d in c.docs] == [{0: 1}, {0: 1}]


def test_vocab_truncation_and_ties():
    lines = [["z", "y", "x", "x"], ["y", "w"]]
    c = build_corpus(lines, max_vocab=2)
    # x:2, y:2 tie broken lexicographically; w, z dropped
    assert c.vocab.terms == ("x", "y")


def test_empty_documents_dropped_and_all_empty_raises():
    c = build_corpus([["a", "a"], ["b"], ["a"]], min_count=2)
    assert len(c) == 2
    with pytest.raises(EmptyCorpusError):
        build_corpus([["a"], ["b"]], min_count=2)
    with pytest.raises(ValueError):
        build_corpus([], min_count=1)
    with pytest.raises(ValueError):
        build_corpus([["a"]], min_count=0)


def test_tokenizer_is_whitespace_and_lowercase(tmp_path):
    assert tokenize("  Hello\tWORLD  foo\n") == ["hello", "world", "foo"]
    path = tmp_path / "docs.txt"
    path.write_text("A b\nC  c\n", encoding="utf-8")
    assert read_token_lines(path) == [["a", "b"], ["c", "c"]]


def test_vocabulary_invariants():
    v = Vocabulary(("x", "y", "z"))
    assert all(v.lookup(t) == i for i, t in enumerate(v.terms))
    with pytest.raises(ValueError):
        Vocabulary(("x", "x"))
    with pytest.raises(ValueError):
        Vocabulary(())


def test_bow_document_validation():
    with pytest.raises(ValueError):
        BowDocument([1, 0], [1, 1])
    with pytest.raises(ValueError):
        BowDocument([0], [0])
    with pytest.raises(ValueError):
        Corpus((BowDocument([5], [1]),), Vocabulary(("a",)))


@given(docs_strategy)
def test_vocab_independent_of_document_order(lines):
    a = build_corpus(lines)
    b = build_corpus(list(reversed(lines)))
    assert a.vocab.terms == b.vocab.terms


@given(docs_strategy)
@settings(max_examples=30)
def test_bow_round_trip(tmp_path_factory, lines):
    c = build_corpus(lines)
    d = tmp_path_factory.mktemp("bow")
    write_bow(c, d / "c.bow", d / "c.vocab")
    back = read_bow(d / "c.bow", d / "c.vocab")
    assert back.vocab.terms == c.vocab.terms
    assert len(back) == len(c)
    for x, y in zip(c.docs, back.docs):
        np.testing.assert_array_equal(x.ids, y.ids)
        np.testing.assert_array_equal(x.counts, y.counts)
    write_bow(back, d / "again.bow", d / "again.vocab")
    assert (d / "again.bow").read_bytes() == (d / "c.bow").read_bytes()
    assert (d / "again.vocab").read_bytes() == (d / "c.vocab").read_bytes()


def test_bow_file_format(tmp_path):
    c = build_corpus([["a", "b", "a"], ["b"]])
    write_bow(c, tmp_path / "x.bow", tmp_path / "x.vocab")
    assert (tmp_path / "x.bow").read_text() == "0:2 1:1\n1:1\n"
    assert (tmp_path / "x.vocab").read_text() == "a\nb\n"


def test_split_sizes_and_halves():
    lines = [["a", "b", "c", "d"]] * 10
    train, test = split_heldout(build_corpus(lines), test_fraction=0.1, seed=0)
    assert len(train) == 9 and len(test) == 1
    assert test[0].observed.length == 2 and test[0].heldout.length == 2


def test_split_deterministic():
    rng = np.random.default_rng(0)
    lines = [list(rng.choice(list("abcdefg"), size=rng.integers(2, 9))) for _ in range(50)]
    c = build_corpus(lines)
    t1, s1 = split_heldout(c, 0.2, seed=7)
    t2, s2 = split_heldout(c, 0.2, seed=7)
    assert [d.as_dict() for d in t1.docs] == [d.as_dict() for d in t2.docs]
    assert [(s.observed.as_dict(), s.heldout.as_dict()) for s in s1] == \
        [(s.observed.as_dict(), s.heldout.as_dict()) for s in s2]


@given(docs_strategy, st.floats(0.05, 0.9), st.integers(0, 1000))
def test_split_merge_reproduces_document(lines, frac, seed):
    c = build_corpus(lines)
    if sum(d.length >= 2 for d in c.docs) == 0 or len(c) < 2:
        with pytest.raises(ValueError):
            split_heldout(c, frac, seed)
        return
    train, test = split_heldout(c, frac, seed)
    assert len(train) + len(test) == len(c)
    remaining = [d.as_dict() for d in c.docs]
    for s in test:
        assert abs(s.observed.length - s.heldout.length) <= 1
        assert s.observed.length >= 1 and s.heldout.length >= 1
        remaining.remove(s.merged().as_dict())
    assert sorted(map(sorted, (d.items() for d in remaining))) == \
        sorted(map(sorted, (d.as_dict().items() for d in train.docs)))


def test_split_errors():
    c = build_corpus([["a", "b"]])
    with pytest.raises(ValueError):
        split_heldout(c, 0.5)
    c2 = build_corpus([["a", "b"], ["a"]])
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            split_heldout(c2, bad)
