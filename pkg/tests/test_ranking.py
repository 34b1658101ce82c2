import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segtrain.corpus import Document, Query, compute_corpus_stats
from segtrain.ranking import (
    Aggregation,
    rank_by_scores,
    rerank,
    score_document,
)
from segtrain.scorer import F_POSITION_RATIO, NUM_FEATURES, ScorerParams


def position_scorer() -> ScorerParams:
    """Scores a segment by its index: segment i scores i / max_segments."""
    w = np.zeros(NUM_FEATURES)
    w[F_POSITION_RATIO] = 1.0
    return ScorerParams("linear", w, 0.0)


@pytest.fixture
def two_window_doc() -> Document:
    # 10 sentences of 100 tokens: two 512-token inference windows
    return Document("doc", "", [[f"s{i}w{j}" for j in range(100)]
                                for i in range(10)])


class TestScoreDocument:
    def test_max_p_takes_best_window(self, two_window_doc):
        stats = compute_corpus_stats([two_window_doc])
        q = Query.from_text("q", "anything")
        # position scorer: window 0 scores 0.0, window 1 scores 0.25
        got = score_document(position_scorer(), q, two_window_doc,
                             Aggregation.MAX_P, stats)
        assert got == pytest.approx(0.25)

    def test_first_p_takes_first_window(self, two_window_doc):
        stats = compute_corpus_stats([two_window_doc])
        q = Query.from_text("q", "anything")
        got = score_document(position_scorer(), q, two_window_doc,
                             Aggregation.FIRST_P, stats)
        assert got == pytest.approx(0.0)

    def test_single_segment_doc_agg_equal(self):
        doc = Document.from_text("doc", "t", "just one short sentence.")
        stats = compute_corpus_stats([doc])
        q = Query.from_text("q", "short sentence")
        rng = np.random.default_rng(0)
        params = ScorerParams("linear", rng.normal(size=NUM_FEATURES), 0.2)
        first = score_document(params, q, doc, Aggregation.FIRST_P, stats)
        best = score_document(params, q, doc, Aggregation.MAX_P, stats)
        assert first == best


class TestRankByScores:
    def test_single_candidate(self):
        ranked = rank_by_scores("q", {"a": -3.0})
        assert [(e.doc_id, e.rank) for e in ranked.entries] == [("a", 1)]

    def test_score_ordering(self):
        ranked = rank_by_scores("q", {"A": 0.2, "B": 0.7})
        assert [e.doc_id for e in ranked.entries] == ["B", "A"]

    def test_ties_break_by_doc_id(self):
        ranked = rank_by_scores("q", {"B": 0.5, "A": 0.5})
        assert [e.doc_id for e in ranked.entries] == ["A", "B"]

    def test_ranks_consecutive(self):
        ranked = rank_by_scores("q", {c: float(i) for i, c in enumerate("fedcba")})
        assert [e.rank for e in ranked.entries] == [1, 2, 3, 4, 5, 6]
        scores = [e.score for e in ranked.entries]
        assert scores == sorted(scores, reverse=True)


def doc_with_terms(doc_id: str, terms: str) -> Document:
    return Document.from_text(doc_id, "", terms + ".")


class TestRerank:
    def _setup(self, texts: dict[str, str]):
        docs = [doc_with_terms(d, t) for d, t in texts.items()]
        stats = compute_corpus_stats(docs)
        return docs, stats

    def test_matching_doc_wins(self):
        docs, stats = self._setup({"a": "unrelated filler words",
                                   "b": "target phrase here"})
        q = Query.from_text("q", "target phrase")
        from segtrain.scorer import F_MATCH_FRACTION
        w = np.zeros(NUM_FEATURES)
        w[F_MATCH_FRACTION] = 1.0
        ranked = rerank(ScorerParams("linear", w, 0.0), q, docs,
                        Aggregation.MAX_P, stats)
        assert ranked.entries[0].doc_id == "b"
        assert ranked.entries[0].rank == 1

    def test_identical_docs_tie_by_id(self):
        docs, stats = self._setup({"z": "same words here", "a": "same words here"})
        q = Query.from_text("q", "same words")
        rng = np.random.default_rng(1)
        params = ScorerParams("linear", rng.normal(size=NUM_FEATURES), 0.0)
        ranked = rerank(params, q, docs, Aggregation.MAX_P, stats)
        assert [e.doc_id for e in ranked.entries] == ["a", "z"]

    def test_duplicate_doc_id_rejected(self):
        docs, stats = self._setup({"a": "words"})
        q = Query.from_text("q", "words")
        params = ScorerParams("linear", np.zeros(NUM_FEATURES), 0.0)
        with pytest.raises(ValueError):
            rerank(params, q, docs + docs, Aggregation.MAX_P, stats)

    def test_empty_pool_rejected(self):
        _, stats = self._setup({"a": "words"})
        params = ScorerParams("linear", np.zeros(NUM_FEATURES), 0.0)
        with pytest.raises(ValueError):
            rerank(params, Query.from_text("q", "x"), [], Aggregation.MAX_P, stats)

    def test_permutation_property(self):
        rng = np.random.default_rng(2)
        vocab = [f"w{i}" for i in range(30)]
        docs = [doc_with_terms(f"d{i}", " ".join(rng.choice(vocab, size=8)))
                for i in range(12)]
        stats = compute_corpus_stats(docs)
        q = Query.from_text("q", "w1 w2 w3")
        params = ScorerParams("linear", rng.normal(size=NUM_FEATURES), 0.0)
        ranked = rerank(params, q, docs, Aggregation.MAX_P, stats)
        assert sorted(e.doc_id for e in ranked.entries) == \
            sorted(d.id for d in docs)


score_lists = st.dictionaries(
    st.text(alphabet="abcdefgh", min_size=1, max_size=3),
    st.lists(st.floats(-5, 5), min_size=1, max_size=4),
    min_size=1, max_size=8)


@settings(max_examples=80)
@given(score_lists)
def test_max_aggregation_invariant_under_monotone_transform(segment_scores):
    """Strictly increasing transforms of segment scores keep the max_p order."""
    raw = {d: max(scores) for d, scores in segment_scores.items()}
    transformed = {d: max(math.atan(s) * 2 + 1 for s in scores)
                   for d, scores in segment_scores.items()}
    order_raw = [e.doc_id for e in rank_by_scores("q", raw).entries]
    order_t = [e.doc_id for e in rank_by_scores("q", transformed).entries]
    assert order_raw == order_t
