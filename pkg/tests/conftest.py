"""Shared fixtures: a tiny handmade collection for unit tests."""

from __future__ import annotations

import pytest

from segtrain.corpus import CorpusStats, Document, Query, compute_corpus_stats


@pytest.fixture
def tiny_docs() -> list[Document]:
    return [
        Document.from_text("d1", "alpha title",
                           "alpha beta gamma. delta beta. epsilon zeta eta."),
        Document.from_text("d2", "other title",
                           "theta iota kappa. lam mu nu. xi omicron pi."),
        Document.from_text("d3", "third one",
                           "rho sigma tau. alpha upsilon phi. chi psi omega."),
    ]


@pytest.fixture
def tiny_stats(tiny_docs) -> CorpusStats:
    return compute_corpus_stats(tiny_docs, max_tokens=12)


@pytest.fixture
def query_alpha() -> Query:
    return Query.from_text("q1", "alpha beta")
