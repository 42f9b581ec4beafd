import json

import numpy as np
import pytest

from ocrpost.corpus import Corpus, Document
from ocrpost.errors import ValidationError
from ocrpost.reuse import (
    AlignParams,
    ReuseCluster,
    Span,
    cluster_spans,
    detect_pairs,
    filter_clusters,
    read_clusters,
    read_pairs,
    write_clusters,
    write_pairs,
)

from .oracles import sw_score

ALPHA = "abcdefghijklmnopqrstuvwxyzäöå"


def random_words(rng, n_words, min_len=4, max_len=9):
    words = []
    for _ in range(n_words):
        length = int(rng.integers(min_len, max_len + 1))
        words.append("".join(ALPHA[i] for i in rng.integers(0, len(ALPHA), length)))
    return words


def random_passage(rng, n_words=30):
    return " ".join(random_words(rng, n_words))


def substitute(text, rate, rng):
    chars = list(text)
    for i in np.flatnonzero(rng.random(len(chars)) < rate):
        if chars[i] != " ":
            chars[i] = ALPHA[int(rng.integers(0, len(ALPHA)))]
    return "".join(chars)


def corpus_from(*texts):
    return Corpus(tuple(Document(f"d{i:03d}.txt", t) for i, t in enumerate(texts)))


# ----------------------------------------------------------------- detect


def test_verbatim_passage_gives_exactly_one_covering_pair():
    rng = np.random.default_rng(42)
    passage = random_passage(rng)
    # Digit flanks share no characters (not even spaces) with the passage.
    corpus = corpus_from("11111" + passage + "22222", "333" + passage + "4444")
    pairs = detect_pairs(corpus)
    assert len(pairs) == 1
    s1, s2, score = pairs[0]
    assert (s1.start, s1.end) == (5, 5 + len(passage))
    assert (s2.start, s2.end) == (3, 3 + len(passage))
    assert s1.text == passage and s2.text == passage
    assert score == len(passage)


def test_no_shared_ngram_no_pairs():
    rng = np.random.default_rng(5)
    corpus = corpus_from(random_passage(rng, 40), random_passage(rng, 40))
    assert detect_pairs(corpus) == []


def test_noisy_copy_detected_with_oracle_score():
    rng = np.random.default_rng(9)
    passage = random_passage(rng, 40)
    noisy = substitute(passage, 0.10, rng)
    corpus = corpus_from("000" + passage + "11", "22222" + noisy + "3333")
    pairs = detect_pairs(corpus)
    assert len(pairs) == 1
    s1, s2, score = pairs[0]
    assert score >= AlignParams().min_score
    assert len(s1) >= 0.9 * len(passage)
    assert score == sw_score(s1.text, s2.text)


def test_within_document_repeat_is_found():
    rng = np.random.default_rng(21)
    passage = random_passage(rng, 25)
    doc = "111" + passage + "22222222" + passage + "333"
    pairs = detect_pairs(corpus_from(doc))
    assert len(pairs) >= 1
    s1, s2, _ = pairs[0]
    assert s1.doc_id == s2.doc_id and s1.start < s2.start


def test_scores_match_quadratic_oracle_across_fixture():
    rng = np.random.default_rng(17)
    passages = [random_passage(rng, 25) for _ in range(3)]
    docs = []
    for passage in passages:
        for _ in range(3):
            docs.append(
                random_passage(rng, 4)
                + " "
                + substitute(passage, 0.12, rng)
                + " "
                + random_passage(rng, 4)
            )
    pairs = detect_pairs(corpus_from(*docs))
    assert pairs  # nine noisy copies, three families
    for s1, s2, score in pairs:
        assert len(s1) <= 500 and len(s2) <= 500
        assert score == sw_score(s1.text, s2.text), (s1.doc_id, s2.doc_id)


def test_detection_independent_of_insertion_order():
    rng = np.random.default_rng(31)
    passage = random_passage(rng, 30)
    texts = [
        random_passage(rng, 3) + " " + substitute(passage, 0.08, rng) for _ in range(4)
    ]
    forward = Corpus(tuple(Document(f"d{i}", t) for i, t in enumerate(texts)))
    backward = Corpus(
        tuple(Document(f"d{i}", t) for i, t in reversed(list(enumerate(texts))))
    )
    assert detect_pairs(forward) == detect_pairs(backward)


def test_empty_corpus_rejected():
    with pytest.raises(ValidationError):
        detect_pairs(Corpus(()))


def test_align_params_validation():
    with pytest.raises(ValidationError):
        AlignParams(seed_len=3)
    with pytest.raises(ValidationError):
        AlignParams(overlap_merge=0.0)
    with pytest.raises(ValidationError):
        AlignParams(min_score=0)


# ---------------------------------------------------------------- cluster


def make_doc_span(doc_text, doc_id, start, end):
    return Span(doc_id=doc_id, start=start, end=end, text=doc_text[start:end])


def test_cluster_transitive_closure_with_overlap_merge():
    # Pairs (A,B), (B',C) where B and B' overlap fully: one cluster
    # {A, B∪B', C}, worked out by hand.
    doc_b = "x" * 10 + "shared reuse passage body" + "y" * 10
    a = Span("docA", 0, 25, "shared reuse passage body")
    b = make_doc_span(doc_b, "docB", 10, 35)
    b_prime = make_doc_span(doc_b, "docB", 12, 35)  # fully inside b
    c = Span("docC", 5, 30, "shared reuse passage body")
    clusters = cluster_spans([(a, b, 25), (b_prime, c, 23)])
    assert len(clusters) == 1
    spans = clusters[0].spans
    assert len(spans) == 3
    merged_b = [s for s in spans if s.doc_id == "docB"]
    assert len(merged_b) == 1
    assert (merged_b[0].start, merged_b[0].end) == (10, 35)


def test_cluster_disjoint_pairs_stay_apart():
    a = Span("d1", 0, 10, "aaaaaaaaaa")
    b = Span("d2", 0, 10, "bbbbbbbbbb")
    c = Span("d3", 0, 10, "cccccccccc")
    d = Span("d4", 0, 10, "dddddddddd")
    clusters = cluster_spans([(a, b, 10), (c, d, 10)])
    assert len(clusters) == 2
    assert [len(c.spans) for c in clusters] == [2, 2]
    assert clusters[0].id == 0 and clusters[1].id == 1


def test_cluster_empty():
    assert cluster_spans([]) == []


def test_cluster_low_overlap_same_doc_spans_coexist():
    doc = "abcdefghij" * 10
    s1 = make_doc_span(doc, "d", 0, 50)
    s2 = make_doc_span(doc, "d", 40, 100)  # 10/50 = 20% of the shorter
    other1 = Span("e", 0, 50, doc[0:50])
    other2 = Span("f", 0, 60, doc[40:100])
    clusters = cluster_spans([(s1, other1, 50), (s2, other2, 60)])
    assert len(clusters) == 2


def test_cluster_partitions_input_spans():
    rng = np.random.default_rng(13)
    passage = random_passage(rng, 30)
    docs = [substitute(passage, 0.1, rng) for _ in range(5)]
    pairs = detect_pairs(corpus_from(*docs))
    clusters = cluster_spans(pairs)
    input_spans = set()
    for s1, s2, _ in pairs:
        input_spans.add((s1.doc_id, s1.start, s1.end))
        input_spans.add((s2.doc_id, s2.start, s2.end))
    for key in input_spans:
        doc_id, start, end = key
        containing = [
            c
            for c in clusters
            for s in c.spans
            if s.doc_id == doc_id and s.start <= start and end <= s.end
        ]
        assert len(containing) == 1, key


def test_filter_clusters_boundary():
    spans = tuple(Span(f"d{i}", 0, 5, "abcde") for i in range(20))
    big = ReuseCluster(id=0, spans=spans)
    small = ReuseCluster(id=1, spans=spans[:19])
    assert filter_clusters([big, small], min_size=20) == [big]
    assert filter_clusters([], min_size=20) == []
    with pytest.raises(ValidationError):
        filter_clusters([big], min_size=1)


# --------------------------------------------------------------------- io


def test_pairs_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    passage = random_passage(rng, 30)
    corpus = corpus_from(passage, substitute(passage, 0.05, rng))
    pairs = detect_pairs(corpus)
    path = tmp_path / "pairs.jsonl"
    write_pairs(pairs, path)
    assert read_pairs(path) == pairs


def test_clusters_round_trip_and_format(tmp_path):
    spans = tuple(Span(f"d{i}", 0, 4, "abcd") for i in range(2))
    clusters = [ReuseCluster(id=0, spans=spans)]
    path = tmp_path / "clusters.jsonl"
    write_clusters(clusters, path)
    record = json.loads(path.read_text(encoding="utf-8").splitlines()[0])
    assert record == {
        "cluster_id": 0,
        "spans": [
            {"doc": "d0", "start": 0, "end": 4, "text": "abcd"},
            {"doc": "d1", "start": 0, "end": 4, "text": "abcd"},
        ],
    }
    assert read_clusters(path) == clusters


def test_detection_output_serialization_is_deterministic(tmp_path):
    rng = np.random.default_rng(23)
    passage = random_passage(rng, 30)
    docs = [substitute(passage, 0.1, rng) for _ in range(4)]
    corpus = corpus_from(*docs)
    out1 = tmp_path / "a.jsonl"
    out2 = tmp_path / "b.jsonl"
    write_pairs(detect_pairs(corpus), out1)
    write_pairs(detect_pairs(corpus), out2)
    assert out1.read_bytes() == out2.read_bytes()


def test_cluster_requires_two_spans():
    with pytest.raises(ValidationError):
        ReuseCluster(id=0, spans=(Span("d", 0, 3, "abc"),))
