"""Tokenization, sentence splitting, and segment construction.

Documents are token sequences grouped into sentences; segments are
contiguous runs of whole sentences, each prefixed with the document
title.  Training segments use randomized token budgets so segment
length carries no label signal; inference segments tile the whole body
with fixed-size non-overlapping windows.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field

DEFAULT_MAX_TOKENS = 512
DEFAULT_MIN_TOKENS = 128
DEFAULT_MAX_SEGMENTS = 4

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_SENTENCE_BOUNDARY_RE = re.compile(r"(?<=[.!?])\s+")


def tokenize(text: str) -> list[str]:
    """Lowercase word tokenizer: splits on whitespace and punctuation.

    Punctuation is dropped, digit runs are kept as tokens.  Empty or
    all-punctuation input yields an empty list.
    """
    return _TOKEN_RE.findall(text.lower())


def split_sentences(text: str) -> list[str]:
    """Split text after '.', '!' or '?' followed by whitespace or end.

    Text without any terminator comes back as a single sentence.
    Surrounding whitespace is stripped from each sentence.
    """
    parts = _SENTENCE_BOUNDARY_RE.split(text)
    return [p.strip() for p in parts if p.strip()]


@dataclass
class Query:
    id: str
    text: str
    tokens: list[str]

    @classmethod
    def from_text(cls, qid: str, text: str) -> "Query":
        return cls(qid, text, tokenize(text))


@dataclass
class Document:
    id: str
    title: str
    sentences: list[list[str]]
    body_token_count: int = field(init=False)

    def __post_init__(self) -> None:
        self.body_token_count = sum(len(s) for s in self.sentences)

    @classmethod
    def from_text(cls, doc_id: str, title: str, body: str) -> "Document":
        return cls(doc_id, title, [tokenize(s) for s in split_sentences(body)])


@dataclass
class Segment:
    """A title-prefixed run of whole sentences, [start, end) over the body."""

    doc_id: str
    index: int
    start: int
    end: int
    tokens: list[str]
    token_count: int = field(init=False)

    def __post_init__(self) -> None:
        self.token_count = len(self.tokens)


@dataclass
class SegmentationPolicy:
    mode: str  # "training" or "inference"
    max_tokens: int = DEFAULT_MAX_TOKENS
    min_tokens: int = DEFAULT_MIN_TOKENS
    max_segments: int | None = DEFAULT_MAX_SEGMENTS
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("training", "inference"):
            raise ValueError(f"unknown segmentation mode: {self.mode!r}")
        if not (0 < self.min_tokens <= self.max_tokens):
            raise ValueError("need 0 < min_tokens <= max_tokens")
        if self.max_segments is not None and self.max_segments < 1:
            raise ValueError("max_segments must be >= 1 or None")


@dataclass
class CorpusStats:
    doc_count: int
    document_frequency: dict[str, int]
    avg_segment_length: float


def document_stream(seed: int, doc_id: str) -> random.Random:
    """Per-document random stream, stable across processes."""
    return random.Random(f"{seed}:{doc_id}")


def _fill_sentences(lengths: list[int], start: int, budget: int) -> int:
    """Greedy whole-sentence packing; returns the exclusive end index.

    Always consumes at least one sentence: a sentence longer than the
    budget becomes a singleton over-budget segment rather than being
    truncated.
    """
    end = start
    used = 0
    n = len(lengths)
    while end < n:
        size = lengths[end]
        if end > start and used + size > budget:
            break
        end += 1
        used += size
        if end - 1 == start and size > budget:
            break
    return end


def _make_segment(doc: Document, title_tokens: list[str], index: int,
                  start: int, end: int) -> Segment:
    tokens = list(title_tokens)
    for sent in doc.sentences[start:end]:
        tokens.extend(sent)
    return Segment(doc.id, index, start, end, tokens)


def segment_for_training(doc: Document, query_token_budget: int,
                         policy: SegmentationPolicy,
                         rng: random.Random) -> list[Segment]:
    """Leading segments with per-segment randomized token budgets.

    Each segment's body budget is drawn uniformly from
    [min_tokens, max_tokens] and reduced by the title and query
    overhead.  At most policy.max_segments segments are emitted, so
    only the leading part of a long document is covered.
    """
    if policy.mode != "training":
        raise ValueError("segment_for_training requires a training policy")
    title_tokens = tokenize(doc.title)
    overhead = len(title_tokens) + query_token_budget
    lengths = [len(s) for s in doc.sentences]
    segments: list[Segment] = []
    start = 0
    while start < len(lengths):
        if policy.max_segments is not None and len(segments) >= policy.max_segments:
            break
        budget = rng.randint(policy.min_tokens, policy.max_tokens) - overhead
        end = _fill_sentences(lengths, start, budget)
        segments.append(_make_segment(doc, title_tokens, len(segments), start, end))
        start = end
    if not segments:
        segments.append(_make_segment(doc, title_tokens, 0, 0, 0))
    return segments


def segment_for_inference(doc: Document, max_tokens: int = DEFAULT_MAX_TOKENS) -> list[Segment]:
    """Non-overlapping fixed-budget windows covering the whole body.

    Every sentence lands in exactly one segment; the spans partition
    [0, sentence_count).  An empty body yields a single title-only
    segment.
    """
    title_tokens = tokenize(doc.title)
    budget = max_tokens - len(title_tokens)
    lengths = [len(s) for s in doc.sentences]
    segments: list[Segment] = []
    start = 0
    while start < len(lengths):
        end = _fill_sentences(lengths, start, budget)
        segments.append(_make_segment(doc, title_tokens, len(segments), start, end))
        start = end
    if not segments:
        segments.append(_make_segment(doc, title_tokens, 0, 0, 0))
    return segments


def compute_corpus_stats(docs: list[Document],
                         max_tokens: int = DEFAULT_MAX_TOKENS) -> CorpusStats:
    """Document frequencies plus the mean inference-segment length.

    Title tokens count toward a document's term set because they are
    part of every segment.  The average segment length is taken over
    the fixed-budget inference segmentation at `max_tokens`.
    """
    if not docs:
        raise ValueError("cannot compute stats over an empty corpus")
    df: dict[str, int] = {}
    total_len = 0
    total_segments = 0
    for doc in docs:
        terms = set(tokenize(doc.title))
        for sent in doc.sentences:
            terms.update(sent)
        for term in terms:
            df[term] = df.get(term, 0) + 1
        for seg in segment_for_inference(doc, max_tokens):
            total_len += seg.token_count
            total_segments += 1
    avg = total_len / total_segments if total_segments else 0.0
    return CorpusStats(len(docs), df, max(avg, 1.0))
