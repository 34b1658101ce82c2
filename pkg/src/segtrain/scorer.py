"""Differentiable segment relevance scoring.

A segment is scored against a query from a 7-dimensional lexical
feature vector, by either a linear model or a one-hidden-layer tanh
network.  Losses (pairwise hinge, pointwise logistic cross-entropy)
come with exact analytic gradients so the whole trainer is plain SGD
over numpy arrays.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass
from typing import IO, Sequence, Union

import numpy as np

from .corpus import (
    DEFAULT_MAX_SEGMENTS,
    DEFAULT_MAX_TOKENS,
    CorpusStats,
    Query,
    Segment,
)

NUM_FEATURES = 7

# feature vector layout
F_MATCH_FRACTION = 0    # fraction of unique query terms present
F_IDF_MATCH = 1         # mean idf over matched unique query terms
F_BM25 = 2              # BM25 over the segment tokens (k1=1.2, b=0.75)
F_LOG_MAX_TF = 3        # log(1 + max tf of any query term)
F_BIGRAM_FRACTION = 4   # fraction of distinct query bigrams present
F_LENGTH_RATIO = 5      # token_count / max_tokens
F_POSITION_RATIO = 6    # segment index / max_segments

BM25_K1 = 1.2
BM25_B = 0.75

MODEL_FORMAT_NAME = "segtrain-model"
MODEL_FORMAT_VERSION = "v1"


class LossKind(enum.Enum):
    PAIRWISE_HINGE = "pairwise_hinge"
    POINTWISE_CE = "pointwise_cross_entropy"


def idf(stats: CorpusStats, term: str) -> float:
    """ln(1 + (N - df + 0.5) / (df + 0.5)); positive for any df."""
    df = stats.document_frequency.get(term, 0)
    return math.log(1.0 + (stats.doc_count - df + 0.5) / (df + 0.5))


def extract_features(query: Query, segment: Segment, stats: CorpusStats,
                     max_tokens: int = DEFAULT_MAX_TOKENS,
                     max_segments: int = DEFAULT_MAX_SEGMENTS) -> np.ndarray:
    """Lexical feature vector for one (query, segment) pair.

    Matching runs over the full segment token sequence, which starts
    with the document title, so title matches count.  A query with no
    tokens produces zeros for all match features.
    """
    counts = Counter(segment.tokens)
    q_unique = list(dict.fromkeys(query.tokens))
    x = np.zeros(NUM_FEATURES)
    if q_unique:
        matched = [t for t in q_unique if t in counts]
        x[F_MATCH_FRACTION] = len(matched) / len(q_unique)
        x[F_IDF_MATCH] = sum(idf(stats, t) for t in matched) / len(q_unique)
        dl = segment.token_count
        norm = BM25_K1 * (1.0 - BM25_B + BM25_B * dl / stats.avg_segment_length)
        bm25 = 0.0
        max_tf = 0
        for t in matched:
            tf = counts[t]
            bm25 += idf(stats, t) * tf * (BM25_K1 + 1.0) / (tf + norm)
            max_tf = max(max_tf, tf)
        x[F_BM25] = bm25
        x[F_LOG_MAX_TF] = math.log1p(max_tf)
        q_bigrams = set(zip(query.tokens, query.tokens[1:]))
        if q_bigrams:
            seg_bigrams = set(zip(segment.tokens, segment.tokens[1:]))
            x[F_BIGRAM_FRACTION] = len(q_bigrams & seg_bigrams) / len(q_bigrams)
    x[F_LENGTH_RATIO] = segment.token_count / max_tokens
    x[F_POSITION_RATIO] = segment.index / max_segments
    return x


@dataclass
class ScorerParams:
    """Weights of the segment scorer; doubles as its gradient container.

    linear: out_weights (7,), out_bias.
    mlp:    hidden_weights (7, H), hidden_bias (H,),
            out_weights (H,), out_bias; tanh activation.
    """

    kind: str
    out_weights: np.ndarray
    out_bias: float
    hidden_weights: np.ndarray | None = None
    hidden_bias: np.ndarray | None = None

    def copy(self) -> "ScorerParams":
        return ScorerParams(
            self.kind,
            self.out_weights.copy(),
            float(self.out_bias),
            None if self.hidden_weights is None else self.hidden_weights.copy(),
            None if self.hidden_bias is None else self.hidden_bias.copy(),
        )

    def arrays(self) -> list[np.ndarray]:
        """Parameter blocks in serialization order."""
        if self.kind == "linear":
            return [self.out_weights, np.array([self.out_bias])]
        return [
            self.hidden_weights.reshape(-1),
            self.hidden_bias,
            self.out_weights,
            np.array([self.out_bias]),
        ]

    @property
    def hidden_dim(self) -> int:
        return 0 if self.kind == "linear" else self.out_weights.shape[0]


Gradient = ScorerParams


def init_params(kind: str, seed: int, hidden_dim: int = 8) -> ScorerParams:
    """Seeded uniform weights on [-0.1, 0.1]; biases start at zero."""
    rng = np.random.default_rng(seed)
    if kind == "linear":
        w = rng.uniform(-0.1, 0.1, NUM_FEATURES)
        return ScorerParams("linear", w, 0.0)
    if kind == "mlp":
        hw = rng.uniform(-0.1, 0.1, (NUM_FEATURES, hidden_dim))
        ow = rng.uniform(-0.1, 0.1, hidden_dim)
        return ScorerParams("mlp", ow, 0.0, hw, np.zeros(hidden_dim))
    raise ValueError(f"unknown scorer kind: {kind!r}")


def _check_features(params: ScorerParams, X: np.ndarray) -> None:
    if X.shape[-1] != NUM_FEATURES:
        raise ValueError(
            f"feature dimension {X.shape[-1]} does not match {NUM_FEATURES}")
    if params.kind not in ("linear", "mlp"):
        raise ValueError(f"unknown scorer kind: {params.kind!r}")


def score_batch(params: ScorerParams, X: np.ndarray) -> np.ndarray:
    """Scores for a (n, 7) feature matrix."""
    X = np.asarray(X, dtype=float)
    _check_features(params, X)
    if params.kind == "linear":
        return X @ params.out_weights + params.out_bias
    h = np.tanh(X @ params.hidden_weights + params.hidden_bias)
    return h @ params.out_weights + params.out_bias


def score(params: ScorerParams, features: np.ndarray) -> float:
    return float(score_batch(params, np.asarray(features, dtype=float)[None, :])[0])


def hinge_loss(y_pos: float, y_neg: float) -> float:
    """max(0, 1 - y_pos + y_neg)."""
    return max(0.0, 1.0 - y_pos + y_neg)


def _sigmoid(y: np.ndarray) -> np.ndarray:
    out = np.empty_like(y)
    pos = y >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-y[pos]))
    e = np.exp(y[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def pointwise_ce_loss(y: float, label: int) -> float:
    """Logistic cross-entropy of a raw score, numerically stable."""
    # max(y,0) - y*label + log(1 + exp(-|y|))
    return max(y, 0.0) - y * label + math.log1p(math.exp(-abs(y)))


@dataclass
class PairExample:
    pos: np.ndarray
    neg: np.ndarray


@dataclass
class PointExample:
    features: np.ndarray
    label: int


TrainingExample = Union[PairExample, PointExample]


def _zero_like(params: ScorerParams) -> ScorerParams:
    g = params.copy()
    g.out_weights[:] = 0.0
    g.out_bias = 0.0
    if g.hidden_weights is not None:
        g.hidden_weights[:] = 0.0
        g.hidden_bias[:] = 0.0
    return g


def _backward(params: ScorerParams, X: np.ndarray, h: np.ndarray | None,
              upstream: np.ndarray, grad: ScorerParams) -> None:
    """Accumulate d(sum_i upstream_i * score_i)/dparams into grad."""
    if params.kind == "linear":
        grad.out_weights += X.T @ upstream
        grad.out_bias += float(upstream.sum())
        return
    grad.out_weights += h.T @ upstream
    grad.out_bias += float(upstream.sum())
    t = (upstream[:, None] * (1.0 - h * h)) * params.out_weights[None, :]
    grad.hidden_weights += X.T @ t
    grad.hidden_bias += t.sum(axis=0)


def _forward(params: ScorerParams, X: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
    if params.kind == "linear":
        return X @ params.out_weights + params.out_bias, None
    h = np.tanh(X @ params.hidden_weights + params.hidden_bias)
    return h @ params.out_weights + params.out_bias, h


def batch_loss_and_gradient(params: ScorerParams,
                            batch: Sequence[TrainingExample],
                            loss: LossKind) -> tuple[float, Gradient]:
    """Mean loss over the batch and its exact analytic gradient.

    The hinge subgradient at the kink (margin exactly 1) is zero, so a
    batch whose pairs all have margin >= 1 is a fixed point.
    """
    if not batch:
        raise ValueError("empty batch")
    grad = _zero_like(params)
    n = len(batch)
    if loss == LossKind.PAIRWISE_HINGE:
        if not all(isinstance(ex, PairExample) for ex in batch):
            raise ValueError("pairwise hinge needs PairExample batches")
        Xp = np.stack([ex.pos for ex in batch]).astype(float)
        Xn = np.stack([ex.neg for ex in batch]).astype(float)
        _check_features(params, Xp)
        yp, hp = _forward(params, Xp)
        yn, hn = _forward(params, Xn)
        margins = 1.0 - yp + yn
        active = (margins > 0).astype(float)
        loss_value = float(np.maximum(margins, 0.0).mean())
        _backward(params, Xp, hp, -active / n, grad)
        _backward(params, Xn, hn, active / n, grad)
        return loss_value, grad
    if loss == LossKind.POINTWISE_CE:
        if not all(isinstance(ex, PointExample) for ex in batch):
            raise ValueError("pointwise cross-entropy needs PointExample batches")
        X = np.stack([ex.features for ex in batch]).astype(float)
        labels = np.array([ex.label for ex in batch], dtype=float)
        _check_features(params, X)
        y, h = _forward(params, X)
        loss_value = float(np.mean(
            np.maximum(y, 0.0) - y * labels + np.log1p(np.exp(-np.abs(y)))))
        _backward(params, X, h, (_sigmoid(y) - labels) / n, grad)
        return loss_value, grad
    raise ValueError(f"unknown loss kind: {loss!r}")


def _all_finite(params: ScorerParams) -> bool:
    return all(np.all(np.isfinite(a)) for a in params.arrays())


def sgd_step(params: ScorerParams, grad: Gradient, lr: float) -> ScorerParams:
    """params - lr * grad, elementwise; rejects non-finite gradients."""
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    if not _all_finite(grad):
        raise ValueError("non-finite gradient")
    out = params.copy()
    out.out_weights -= lr * grad.out_weights
    out.out_bias -= lr * grad.out_bias
    if out.hidden_weights is not None:
        out.hidden_weights -= lr * grad.hidden_weights
        out.hidden_bias -= lr * grad.hidden_bias
    return out


def params_to_vector(params: ScorerParams) -> np.ndarray:
    return np.concatenate([a.reshape(-1) for a in params.arrays()])


def params_from_vector(kind: str, vec: np.ndarray, hidden_dim: int = 8) -> ScorerParams:
    vec = np.asarray(vec, dtype=float)
    if kind == "linear":
        if vec.size != NUM_FEATURES + 1:
            raise ValueError("bad parameter count for linear scorer")
        return ScorerParams("linear", vec[:NUM_FEATURES].copy(), float(vec[NUM_FEATURES]))
    if kind == "mlp":
        h = hidden_dim
        expected = NUM_FEATURES * h + h + h + 1
        if vec.size != expected:
            raise ValueError("bad parameter count for mlp scorer")
        i = NUM_FEATURES * h
        hw = vec[:i].reshape(NUM_FEATURES, h).copy()
        hb = vec[i:i + h].copy()
        ow = vec[i + h:i + 2 * h].copy()
        return ScorerParams("mlp", ow, float(vec[-1]), hw, hb)
    raise ValueError(f"unknown scorer kind: {kind!r}")


def write_params(params: ScorerParams, stream: IO[str]) -> None:
    """Text model file: header plus one parameter per line.

    Values are written with 17 significant digits so the round trip is
    exact for every representable double.
    """
    if not _all_finite(params):
        raise ValueError("refusing to serialize non-finite parameters")
    stream.write(
        f"{MODEL_FORMAT_NAME} {MODEL_FORMAT_VERSION} kind={params.kind} "
        f"dim={NUM_FEATURES} hidden={params.hidden_dim}\n")
    for value in params_to_vector(params):
        stream.write(format(float(value), ".17g") + "\n")


def read_params(stream: IO[str]) -> ScorerParams:
    header = stream.readline().strip()
    fields = header.split()
    if (len(fields) != 5 or fields[0] != MODEL_FORMAT_NAME
            or fields[1] != MODEL_FORMAT_VERSION):
        raise ValueError(f"bad model header: {header!r}")
    opts = dict(f.split("=", 1) for f in fields[2:])
    kind = opts.get("kind", "")
    if int(opts.get("dim", "0")) != NUM_FEATURES:
        raise ValueError("model feature dimension mismatch")
    hidden = int(opts.get("hidden", "0"))
    values = []
    for line_no, line in enumerate(stream, start=2):
        line = line.strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError as exc:
            raise ValueError(f"bad parameter at line {line_no}: {line!r}") from exc
    params = params_from_vector(kind, np.array(values), hidden_dim=max(hidden, 1))
    if not _all_finite(params):
        raise ValueError("model file contains non-finite parameters")
    return params
