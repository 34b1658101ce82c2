"""Ranking metrics, segment-selection precision, significance, splits.

Qrels map (query_id, doc_id) to an integer relevance grade; a missing
pair means grade 0.  Runs map query ids to RankedLists.  The paired
t-test is self-contained: the t distribution CDF goes through the
regularized incomplete beta function evaluated by continued fraction.
"""

from __future__ import annotations

import math
import random

from .ranking import RankedList

Qrels = dict[tuple[str, str], int]
Run = dict[str, RankedList]
GoldSegments = dict[tuple[str, str], int]
SegmentIndexMap = dict[tuple[str, str], int]


def _qrels_by_query(qrels: Qrels) -> dict[str, dict[str, int]]:
    out: dict[str, dict[str, int]] = {}
    for (qid, doc_id), grade in qrels.items():
        if grade < 0:
            raise ValueError(f"negative relevance grade for {(qid, doc_id)}")
        out.setdefault(qid, {})[doc_id] = grade
    return out


def _check_overlap(run: Run, by_query: dict[str, dict[str, int]]) -> None:
    if not any(qid in run for qid in by_query):
        raise ValueError("run and qrels share no queries")


def mrr(run: Run, qrels: Qrels, cutoff: int = 10) -> float:
    """Mean reciprocal rank of the first relevant document within cutoff.

    Averaged over the queries present in the qrels; a query with no
    run entries or no relevant document in the top `cutoff` scores 0.
    """
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    by_query = _qrels_by_query(qrels)
    _check_overlap(run, by_query)
    total = 0.0
    for qid, judged in sorted(by_query.items()):
        ranked = run.get(qid)
        if ranked is None:
            continue
        for entry in ranked.entries[:cutoff]:
            if judged.get(entry.doc_id, 0) > 0:
                total += 1.0 / entry.rank
                break
    return total / len(by_query)


def ndcg_at_k(run: Run, qrels: Qrels, k: int = 10) -> float:
    """NDCG@k with linear gain and log2(rank + 1) discount.

    The ideal DCG comes from the query's judged grades sorted in
    descending order; queries without any relevant document score 0.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    by_query = _qrels_by_query(qrels)
    _check_overlap(run, by_query)
    total = 0.0
    for qid, judged in sorted(by_query.items()):
        ideal = sorted(judged.values(), reverse=True)[:k]
        idcg = sum(g / math.log2(i + 2) for i, g in enumerate(ideal))
        if idcg == 0:
            continue
        ranked = run.get(qid)
        if ranked is None:
            continue
        dcg = sum(
            judged.get(e.doc_id, 0) / math.log2(e.rank + 1)
            for e in ranked.entries[:k])
        total += dcg / idcg
    return total / len(by_query)


def segment_p_at_1(selection: SegmentIndexMap, gold: GoldSegments) -> float:
    """Fraction of gold pairs whose selected segment index is the gold one."""
    if not gold:
        raise ValueError("empty gold segment map")
    hits = 0
    for key, gold_index in gold.items():
        if key not in selection:
            raise ValueError(f"selection missing entry for {key}")
        hits += int(selection[key] == gold_index)
    return hits / len(gold)


def _betacf(a: float, b: float, x: float, tol: float = 1e-10,
            max_iter: int = 500) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf_two_sided(t: float, df: int) -> float:
    """Two-sided tail probability P(|T_df| >= |t|)."""
    if df < 1:
        raise ValueError("df must be >= 1")
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def paired_t_test(a: list[float], b: list[float]) -> float:
    """Two-sided paired t-test p-value with n - 1 degrees of freedom.

    Degenerate zero-variance differences decide directly: p = 1 when
    the mean difference is 0, else p = 0.
    """
    if len(a) != len(b):
        raise ValueError("paired t-test needs equal-length sequences")
    n = len(a)
    if n < 2:
        raise ValueError("paired t-test needs at least 2 pairs")
    diffs = [x - y for x, y in zip(a, b)]
    mean = math.fsum(diffs) / n
    var = math.fsum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        return 1.0 if mean == 0.0 else 0.0
    t = mean / math.sqrt(var / n)
    return min(1.0, max(0.0, student_t_sf_two_sided(t, n - 1)))


def kfold_split(query_ids: list[str], k: int,
                seed: int) -> list[tuple[list[str], list[str]]]:
    """Seeded shuffle then contiguous near-equal folds.

    Returns k (train_ids, test_ids) pairs; the test folds partition the
    query set, with the first len(query_ids) % k folds one query larger.
    """
    n = len(query_ids)
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > n:
        raise ValueError("more folds than queries")
    shuffled = list(query_ids)
    random.Random(seed).shuffle(shuffled)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        test = shuffled[start:start + size]
        train = shuffled[:start] + shuffled[start + size:]
        folds.append((train, test))
        start += size
    return folds


def holdout_split(query_ids: list[str], dev_fraction: float,
                  seed: int) -> tuple[list[str], list[str]]:
    """Seeded shuffle into (train_ids, dev_ids); dev gets the tail fraction."""
    if not 0.0 < dev_fraction < 1.0:
        raise ValueError("dev_fraction must be in (0, 1)")
    shuffled = list(query_ids)
    random.Random(seed).shuffle(shuffled)
    n_dev = max(1, int(round(len(shuffled) * dev_fraction)))
    if n_dev >= len(shuffled):
        raise ValueError("dev split would consume every query")
    return shuffled[:-n_dev], shuffled[-n_dev:]
