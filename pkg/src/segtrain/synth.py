"""Synthetic test collections with planted gold segments.

Each topic has one relevant document whose query terms are written
into a single sentence inside a known training segment, plus hard
negatives: one negative document per topic leaks a fraction of the
query terms into a random segment.  Query vocabularies are disjoint
from the background distribution and from each other, so a brute-force
term-overlap oracle recovers the planted segment exactly when no noise
is applied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import (
    Document,
    Query,
    SegmentationPolicy,
    document_stream,
    segment_for_training,
)
from .evaluation import GoldSegments, Qrels


@dataclass
class SynthConfig:
    num_queries: int = 50
    docs_per_query: int = 6  # candidate pool per topic, incl. the relevant doc
    sentences_per_doc: int = 18
    tokens_per_sentence: int = 128
    vocab_size: int = 5000
    query_terms: int = 5
    plant_lo: int = 0
    plant_hi: int = 4
    distractor_overlap: float = 0.3
    noise: float = 0.1
    seed: int = 0
    # segmentation knobs; must match the downstream training policy
    title_token_count: int = 2
    max_tokens: int = 512
    min_tokens: int = 128
    max_segments: int = 4
    query_token_budget: int = 16

    def __post_init__(self) -> None:
        if min(self.num_queries, self.docs_per_query, self.sentences_per_doc,
               self.tokens_per_sentence, self.vocab_size, self.query_terms) < 1:
            raise ValueError("all synthetic counts must be positive")
        if self.docs_per_query < 2:
            raise ValueError("need at least one negative per topic")
        if not 0 <= self.plant_lo < self.plant_hi:
            raise ValueError("invalid plant segment range")
        if not (0.0 <= self.distractor_overlap <= 1.0
                and 0.0 <= self.noise <= 1.0):
            raise ValueError("distractor_overlap and noise must be in [0, 1]")
        if self.query_terms > self.tokens_per_sentence:
            raise ValueError("query terms cannot exceed sentence length")

    def policy(self, seed: int) -> SegmentationPolicy:
        return SegmentationPolicy("training", self.max_tokens, self.min_tokens,
                                  self.max_segments, seed)


@dataclass
class SynthCorpus:
    queries: list[Query]
    documents: list[Document]
    qrels: Qrels
    gold: GoldSegments
    candidates: dict[str, list[str]]

    def documents_by_id(self) -> dict[str, Document]:
        return {doc.id: doc for doc in self.documents}


def _training_spans(doc: Document, cfg: SynthConfig,
                    seed: int) -> list[tuple[int, int]]:
    segments = segment_for_training(doc, cfg.query_token_budget,
                                    cfg.policy(seed),
                                    document_stream(seed, doc.id))
    return [(seg.start, seg.end) for seg in segments]


def generate_corpus(cfg: SynthConfig, seed: int | None = None) -> SynthCorpus:
    """Deterministic corpus with one planted relevant document per query.

    Background sentences are drawn from a mildly skewed unigram
    distribution over the non-query vocabulary.  The planted sentence
    replaces the leading tokens of one sentence inside the gold
    training segment, each query term surviving with probability
    1 - noise.  One negative per topic receives round(overlap * terms)
    query terms in a random training segment.
    """
    if seed is None:
        seed = cfg.seed
    rng = np.random.default_rng(seed)
    reserved = cfg.num_queries * cfg.query_terms
    if reserved >= cfg.vocab_size:
        raise ValueError("vocab_size too small for the reserved query terms")
    vocab = np.array([f"w{i:05d}" for i in range(cfg.vocab_size)], dtype=object)
    bg_ids = np.arange(reserved, cfg.vocab_size)
    bg_probs = 1.0 / (np.arange(len(bg_ids)) + 3.0)
    bg_probs /= bg_probs.sum()

    queries: list[Query] = []
    documents: list[Document] = []
    qrels: Qrels = {}
    gold: GoldSegments = {}
    candidates: dict[str, list[str]] = {}

    for t in range(cfg.num_queries):
        qid = f"q{t:04d}"
        q_tokens = [vocab[t * cfg.query_terms + i] for i in range(cfg.query_terms)]
        queries.append(Query(qid, " ".join(q_tokens), list(q_tokens)))

        pool_ids = [f"d{t * cfg.docs_per_query + j:05d}"
                    for j in range(cfg.docs_per_query)]
        pos_slot = int(rng.integers(cfg.docs_per_query))
        pool_docs: list[Document] = []
        for doc_id in pool_ids:
            title_ids = rng.choice(bg_ids, size=cfg.title_token_count, p=bg_probs)
            body_ids = rng.choice(
                bg_ids, size=(cfg.sentences_per_doc, cfg.tokens_per_sentence),
                p=bg_probs)
            sentences = [vocab[row].tolist() for row in body_ids]
            pool_docs.append(Document(doc_id, " ".join(vocab[title_ids]), sentences))

        pos_doc = pool_docs[pos_slot]
        spans = _training_spans(pos_doc, cfg, seed)
        if cfg.plant_hi > len(spans):
            raise ValueError(
                f"plant range [{cfg.plant_lo}, {cfg.plant_hi}) exceeds the "
                f"{len(spans)} training segments of {pos_doc.id}")
        g = int(rng.integers(cfg.plant_lo, cfg.plant_hi))
        start, end = spans[g]
        sent_idx = int(rng.integers(start, end)) if end > start else start
        sentence = pos_doc.sentences[sent_idx]
        for i, term in enumerate(q_tokens):
            if rng.random() >= cfg.noise:
                sentence[i] = term

        leak_count = int(round(cfg.distractor_overlap * cfg.query_terms))
        negatives = [d for d in pool_docs if d.id != pos_doc.id]
        if leak_count > 0 and negatives:
            leak_doc = negatives[int(rng.integers(len(negatives)))]
            leak_spans = _training_spans(leak_doc, cfg, seed)
            ls, le = leak_spans[int(rng.integers(len(leak_spans)))]
            leak_sent = leak_doc.sentences[int(rng.integers(ls, le))]
            picked = sorted(rng.choice(cfg.query_terms, size=leak_count,
                                       replace=False).tolist())
            for i, q_pos in enumerate(picked):
                leak_sent[i] = q_tokens[q_pos]

        documents.extend(pool_docs)
        qrels[(qid, pos_doc.id)] = 1
        gold[(qid, pos_doc.id)] = g
        candidates[qid] = pool_ids

    return SynthCorpus(queries, documents, qrels, gold, candidates)
