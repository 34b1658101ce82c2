"""Command-line surface tying the pipeline together.

Subcommands: synth, segment, train, select, rerank, eval,
eval-selection.  Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import formats
from .corpus import (
    Document,
    Query,
    SegmentationPolicy,
    compute_corpus_stats,
    document_stream,
    segment_for_inference,
    segment_for_training,
)
from .evaluation import (
    holdout_split,
    mrr,
    ndcg_at_k,
    paired_t_test,
    segment_p_at_1,
)
from .formats import ParseError, PipelineConfig
from .ranking import Aggregation, rerank
from .scorer import read_params, score_batch, write_params, extract_features
from .synth import generate_corpus
from .training import (
    ALL_SEGMENTS,
    SelectionSource,
    best_train,
    build_eval_bundle,
    build_training_set,
    train_baseline,
    train_single,
)


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that exits with status 1 on usage errors."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    if getattr(args, "config", None):
        with open(args.config) as stream:
            config = formats.parse_config(stream)
    else:
        config = PipelineConfig()
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "out", None):
        config.out = args.out
    return config


def _path(args: argparse.Namespace, config: PipelineConfig, name: str) -> str:
    value = getattr(args, name, None) or getattr(config, name, "")
    if not value:
        raise ParseError(f"missing required input: --{name}")
    return value


def _read(parser_fn, path: str):
    with open(path) as stream:
        return parser_fn(stream)


def _training_policy(config: PipelineConfig) -> SegmentationPolicy:
    return SegmentationPolicy("training", config.max_tokens, config.min_tokens,
                              config.max_segments, config.seed)


def _training_segments(doc: Document, config: PipelineConfig):
    return segment_for_training(doc, config.query_token_budget,
                                _training_policy(config),
                                document_stream(config.seed, doc.id))


# ---------------------------------------------------------------------------
# subcommands

def _cmd_synth(args: argparse.Namespace) -> int:
    config = _load_config(args)
    out_dir = Path(config.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus = generate_corpus(config.synth_config(), config.seed)
    with open(out_dir / "corpus.jsonl", "w") as stream:
        formats.write_corpus(corpus.documents, stream)
    with open(out_dir / "queries.tsv", "w") as stream:
        formats.write_queries(corpus.queries, stream)
    with open(out_dir / "qrels.txt", "w") as stream:
        formats.write_qrels(corpus.qrels, stream)
    with open(out_dir / "candidates.tsv", "w") as stream:
        formats.write_candidates(corpus.candidates, stream)
    with open(out_dir / "gold.jsonl", "w") as stream:
        formats.write_gold(corpus.gold, stream)
    print(f"wrote {len(corpus.queries)} topics, {len(corpus.documents)} documents "
          f"to {out_dir}")
    return 0


def _cmd_segment(args: argparse.Namespace) -> int:
    config = _load_config(args)
    documents = _read(formats.parse_corpus, _path(args, config, "corpus"))
    rows = []
    for doc_id in sorted(documents):
        doc = documents[doc_id]
        if args.mode == "training":
            segments = _training_segments(doc, config)
        else:
            segments = segment_for_inference(doc, config.max_tokens)
        rows.extend(
            {"doc_id": seg.doc_id, "index": seg.index, "start": seg.start,
             "end": seg.end, "token_count": seg.token_count}
            for seg in segments)
    out = open(config.out, "w") if config.out else sys.stdout
    try:
        for row in rows:
            out.write(json.dumps(row, sort_keys=True) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _load_topics(args: argparse.Namespace, config: PipelineConfig):
    documents = _read(formats.parse_corpus, _path(args, config, "corpus"))
    queries = _read(formats.parse_queries, _path(args, config, "queries"))
    qrels = _read(formats.parse_qrels, _path(args, config, "qrels"))
    candidates = _read(formats.parse_candidates, _path(args, config, "candidates"))
    return documents, queries, qrels, candidates


def _cmd_train(args: argparse.Namespace) -> int:
    config = _load_config(args)
    documents, queries, qrels, candidates = _load_topics(args, config)
    stats = compute_corpus_stats(list(documents.values()), config.max_tokens)
    train_ids, dev_ids = holdout_split([q.id for q in queries],
                                       config.dev_fraction, config.seed)
    by_id = {q.id: q for q in queries}
    train_queries = [by_id[qid] for qid in train_ids]
    dev_queries = [by_id[qid] for qid in dev_ids]
    dev_qrels = {key: g for key, g in qrels.items() if key[0] in set(dev_ids)}
    cfg = config.train_config()
    tset = build_training_set(train_queries, qrels, candidates, documents,
                              _training_policy(config),
                              config.query_token_budget, stats)
    dev = build_eval_bundle(dev_queries, dev_qrels, candidates, documents,
                            stats, config.max_tokens, config.max_segments,
                            config.mrr_cutoff)
    print(f"mode={args.mode} topics={len(tset.topics)} dev_queries={len(dev_queries)}")
    if args.mode == "best":
        result = best_train(tset, dev, cfg)
        for state in result.history:
            print(f"iteration={state.n} dev_mrr={state.validation_metric:.6f}")
        print(f"best_iteration={result.best_iteration}")
        params = result.best_state.params
        dev_mrr = result.best_state.validation_metric
    elif args.mode == "theta0":
        params, dev_mrr = train_single(tset, dev, ALL_SEGMENTS, cfg, cfg.seed)
    elif args.mode == "first":
        params, dev_mrr = train_baseline(tset, dev, SelectionSource.FIRST, cfg)
    elif args.mode == "gold":
        gold = _read(formats.parse_gold, _path(args, config, "gold"))
        params, dev_mrr = train_baseline(tset, dev, SelectionSource.GOLD, cfg, gold)
    else:  # pragma: no cover - argparse restricts choices
        raise ParseError(f"unknown training mode {args.mode!r}")
    print(f"dev_mrr={dev_mrr:.6f}")
    out_path = config.out or config.model
    if not out_path:
        raise ParseError("missing required output path: --out")
    with open(out_path, "w") as stream:
        write_params(params, stream)
    print(f"model written to {out_path}")
    return 0


def _cmd_select(args: argparse.Namespace) -> int:
    config = _load_config(args)
    documents = _read(formats.parse_corpus, _path(args, config, "corpus"))
    queries = _read(formats.parse_queries, _path(args, config, "queries"))
    candidates = _read(formats.parse_candidates, _path(args, config, "candidates"))
    with open(_path(args, config, "model")) as stream:
        params = read_params(stream)
    stats = compute_corpus_stats(list(documents.values()), config.max_tokens)
    segment_cache: dict[str, list] = {}

    def doc_segments(doc_id: str):
        if doc_id not in segment_cache:
            segment_cache[doc_id] = _training_segments(documents[doc_id], config)
        return segment_cache[doc_id]

    def select_for(query: Query):
        rows = []
        for doc_id in candidates.get(query.id, []):
            segments = doc_segments(doc_id)[:config.max_segments]
            feats = [extract_features(query, seg, stats, config.max_tokens,
                                      config.max_segments) for seg in segments]
            scores = score_batch(params, np.stack(feats))
            best = int(scores.argmax())
            rows.append(((query.id, doc_id), best, float(scores[best])))
        return rows

    results = _map_threads(select_for, queries, args.threads)
    selection = {}
    scores = {}
    for rows in results:
        for key, index, value in rows:
            selection[key] = index
            scores[key] = value
    with open(_path(args, config, "out"), "w") as stream:
        formats.write_selection(selection, stream, scores)
    print(f"selected segments for {len(selection)} pairs")
    return 0


def _map_threads(fn, items, threads: int):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _cmd_rerank(args: argparse.Namespace) -> int:
    config = _load_config(args)
    documents = _read(formats.parse_corpus, _path(args, config, "corpus"))
    queries = _read(formats.parse_queries, _path(args, config, "queries"))
    candidates = _read(formats.parse_candidates, _path(args, config, "candidates"))
    with open(_path(args, config, "model")) as stream:
        params = read_params(stream)
    stats = compute_corpus_stats(list(documents.values()), config.max_tokens)
    agg = Aggregation(args.mode)

    def rank_one(query: Query):
        pool = [documents[d] for d in candidates.get(query.id, [])]
        if not pool:
            return None
        return rerank(params, query, pool, agg, stats,
                      config.max_tokens, config.max_segments)

    ranked = _map_threads(rank_one, queries, args.threads)
    run = {r.query_id: r for r in ranked if r is not None}
    with open(_path(args, config, "out"), "w") as stream:
        formats.write_run(run, args.tag, stream)
    print(f"wrote rankings for {len(run)} queries")
    return 0


def _per_query_metrics(run, qrels, cutoff: int, k: int):
    qids = sorted({qid for qid, _ in qrels} & set(run))
    out = {}
    for qid in qids:
        q_qrels = {key: g for key, g in qrels.items() if key[0] == qid}
        q_run = {qid: run[qid]}
        out[qid] = (mrr(q_run, q_qrels, cutoff), ndcg_at_k(q_run, q_qrels, k))
    return out


def _cmd_eval(args: argparse.Namespace) -> int:
    config = _load_config(args)
    run = _read(formats.parse_run, _path(args, config, "run"))
    qrels = _read(formats.parse_qrels, _path(args, config, "qrels"))
    print(f"# mrr_cutoff={config.mrr_cutoff}")
    print(f"# ndcg_k={config.ndcg_k}")
    print(f"mrr={mrr(run, qrels, config.mrr_cutoff):.6f}")
    print(f"ndcg@{config.ndcg_k}={ndcg_at_k(run, qrels, config.ndcg_k):.6f}")
    per_query = _per_query_metrics(run, qrels, config.mrr_cutoff, config.ndcg_k)
    if args.per_query:
        with open(args.per_query, "w") as stream:
            stream.write(f"qid\tmrr\tndcg@{config.ndcg_k}\n")
            for qid, (rr, nd) in sorted(per_query.items()):
                stream.write(f"{qid}\t{rr:.6f}\t{nd:.6f}\n")
    if args.baseline_run:
        baseline = _read(formats.parse_run, args.baseline_run)
        base_metrics = _per_query_metrics(baseline, qrels, config.mrr_cutoff,
                                          config.ndcg_k)
        shared = sorted(set(per_query) & set(base_metrics))
        if len(shared) < 2:
            raise ParseError("need at least 2 shared queries for the t-test")
        p_mrr = paired_t_test([per_query[q][0] for q in shared],
                              [base_metrics[q][0] for q in shared])
        p_ndcg = paired_t_test([per_query[q][1] for q in shared],
                               [base_metrics[q][1] for q in shared])
        print(f"t_test_mrr_p={p_mrr:.6f}")
        print(f"t_test_ndcg_p={p_ndcg:.6f}")
    return 0


def _cmd_eval_selection(args: argparse.Namespace) -> int:
    with open(args.selection) as stream:
        selection, _ = formats.parse_selection(stream)
    with open(args.gold) as stream:
        gold = formats.parse_gold(stream)
    print(f"pairs={len(gold)}")
    print(f"segment_p_at_1={segment_p_at_1(selection, gold):.6f}")
    return 0


# ---------------------------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="pipeline configuration file")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for scoring")
    parser.add_argument("--out", help="output path")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="segtrain",
                     description="Segment-selection training pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic collection")
    _add_common(p)
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("segment", help="emit document segments")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--mode", choices=["training", "inference"], required=True)
    p.set_defaults(fn=_cmd_segment)

    p = sub.add_parser("train", help="train a scorer")
    _add_common(p)
    p.add_argument("--mode", choices=["first", "gold", "best", "theta0"],
                   required=True)
    p.add_argument("--corpus")
    p.add_argument("--queries")
    p.add_argument("--qrels")
    p.add_argument("--candidates")
    p.add_argument("--gold")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("select", help="emit selected segment indices")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--corpus")
    p.add_argument("--queries")
    p.add_argument("--candidates")
    p.set_defaults(fn=_cmd_select)

    p = sub.add_parser("rerank", help="re-rank candidate documents")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--corpus")
    p.add_argument("--queries")
    p.add_argument("--candidates")
    p.add_argument("--mode", choices=["firstp", "maxp"], default="maxp")
    p.add_argument("--tag", default="segtrain")
    p.set_defaults(fn=_cmd_rerank)

    p = sub.add_parser("eval", help="extrinsic ranking metrics")
    _add_common(p)
    p.add_argument("--run")
    p.add_argument("--qrels")
    p.add_argument("--baseline-run", dest="baseline_run",
                   help="second run for the paired t-test")
    p.add_argument("--per-query", dest="per_query",
                   help="write per-query metrics TSV here")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("eval-selection", help="segment selection precision")
    _add_common(p)
    p.add_argument("--selection", required=True)
    p.add_argument("--gold", required=True)
    p.set_defaults(fn=_cmd_eval_selection)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ParseError, ValueError, OSError, KeyError) as exc:
        print(f"segtrain: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
