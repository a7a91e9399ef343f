import random
import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import char_walk_clean
from sentikit.corpus import (
    CleanConfig,
    CleanedDoc,
    CorpusError,
    clean_corpus,
    clean_text,
    filter_stopwords,
    load_corpus,
    load_stopwords,
    split_corpus,
)


def write_csv(path, body):
    path.write_text(body, encoding="utf-8")
    return path


def test_load_corpus_keeps_order(tmp_path):
    p = write_csv(tmp_path / "r.csv", 'review,sentiment\n"Great, fun",positive\nawful,negative\n')
    rows = load_corpus(p)
    assert [(r.text, r.label) for r in rows] == [("Great, fun", "positive"), ("awful", "negative")]


def test_load_corpus_quoted_newlines_and_header_case(tmp_path):
    p = write_csv(tmp_path / "r.csv", 'Review,SENTIMENT\n"line one\nline two",negative\n')
    (row,) = load_corpus(p)
    assert row.text == "line one\nline two"


def test_label_is_trimmed_and_casefolded(tmp_path):
    p = write_csv(tmp_path / "r.csv", "review,sentiment\nok,Positive \n")
    assert load_corpus(p)[0].label == "positive"


def test_unknown_label_names_row(tmp_path):
    p = write_csv(tmp_path / "r.csv", "review,sentiment\na,positive\nb,neutral\n")
    with pytest.raises(CorpusError, match="row 2"):
        load_corpus(p)


def test_missing_file_and_bad_header(tmp_path):
    with pytest.raises(CorpusError, match="not found"):
        load_corpus(tmp_path / "nope.csv")
    p = write_csv(tmp_path / "r.csv", "text,label\na,positive\n")
    with pytest.raises(CorpusError, match="header"):
        load_corpus(p)


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("Wow!!!  Loved it 10/10", "wow loved it"),
        ("", ""),
        ("<br />Good", "br good"),
        ("  \t\nSpaced\t out  ", "spaced out"),
        ("abc123def", "abcdef"),
        ("snake_case", "snake case"),
    ],
)
def test_clean_text_examples(raw, expected):
    assert clean_text(raw) == expected


def test_strip_html_urls_toggle():
    cfg = CleanConfig(strip_html_urls=True)
    assert clean_text("Good<br />bad http://x.com/a?b=1 fine", cfg) == "good bad fine"
    assert clean_text("<b>Bold</b>", CleanConfig()) == "b bold b"


def test_lowercase_off_keeps_capitals():
    assert clean_text("Hello World!", CleanConfig(lowercase=False)) == "Hello World"


printable = st.text(alphabet=st.characters(max_codepoint=0x2FF), max_size=200)


@settings(max_examples=300)
@given(printable)
def test_clean_text_alphabet_and_idempotence(s):
    out = clean_text(s)
    assert set(out) <= set(string.ascii_lowercase + " ")
    assert "  " not in out
    assert out == out.strip(" ")
    assert clean_text(out) == out


@settings(max_examples=300)
@given(printable)
def test_clean_text_matches_character_walk(s):
    assert clean_text(s) == char_walk_clean(s)


def test_bundled_stopwords_are_lowercase_words():
    words = load_stopwords()
    assert {"the", "was", "and", "don", "t"} <= words
    assert all(w.isalpha() and w.islower() for w in words)


def test_custom_stopword_file(tmp_path):
    p = tmp_path / "stop.txt"
    p.write_text("# comment\nfoo\n\nbar\n", encoding="utf-8")
    assert load_stopwords(p) == {"foo", "bar"}
    empty = tmp_path / "empty.txt"
    empty.write_text("# nothing\n", encoding="utf-8")
    with pytest.raises(CorpusError):
        load_stopwords(empty)


def test_filter_stopwords():
    stop = {"the", "was", "a"}
    assert filter_stopwords(["the", "movie", "was", "great"], stop) == ["movie", "great"]
    assert filter_stopwords([], stop) == []
    assert filter_stopwords(["the", "a"], stop) == []


@given(st.lists(st.sampled_from(["a", "b", "the", "was", "c"]), max_size=30))
def test_filter_stopwords_is_subsequence(tokens):
    out = filter_stopwords(tokens, {"the", "was"})
    it = iter(tokens)
    assert all(tok in it for tok in out)
    assert len(out) <= len(tokens)


def test_clean_corpus_drops_stopwords(tmp_path):
    p = write_csv(tmp_path / "r.csv", "review,sentiment\nThe movie was GREAT!,positive\n")
    (doc,) = clean_corpus(load_corpus(p))
    assert doc == CleanedDoc(("movie", "great"), 1)


def docs(n):
    return [CleanedDoc((f"w{i}",), i % 2) for i in range(n)]


@pytest.mark.parametrize("n, sizes", [(10, (7, 1, 2)), (100, (70, 15, 15)), (11, (7, 2, 2)), (5000, (3500, 750, 750))])
def test_split_sizes(n, sizes):
    s = split_corpus(docs(n))
    assert s.sizes() == sizes
    assert s.train + s.valid + s.test == docs(n)


def test_split_rejects_tiny_corpus():
    with pytest.raises(CorpusError):
        split_corpus(docs(9))


@given(st.integers(min_value=10, max_value=2000))
def test_split_partitions_in_order(n):
    d = docs(n)
    s = split_corpus(d)
    assert len(s.train) == (7 * n) // 10
    assert s.train + s.valid + s.test == d


def test_split_is_deterministic(tmp_path):
    rng = random.Random(3)
    lines = ["review,sentiment"] + [f"r{rng.random()},{rng.choice(['positive', 'negative'])}" for _ in range(40)]
    p = write_csv(tmp_path / "r.csv", "\n".join(lines) + "\n")
    assert split_corpus(clean_corpus(load_corpus(p))) == split_corpus(clean_corpus(load_corpus(p)))
