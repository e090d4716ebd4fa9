"""Command-line entry points: decompose, answer, train-pointer, train-scorer,
retrieve, invert, evaluate, regen-distractors.

Exit codes: 0 success (possibly with warnings), 1 internal error, 2
usage/config error.  Configuration precedence: flags > key=value config file
> DECOMP_DATA_DIR environment variable > defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

from . import decompose as dec
from . import metrics, orchestrate, retrieval
from .core import (Paragraph, QAExample, ReasoningType, example_to_record,
                   load_dataset, normalize_answer, tokenize)
from .errors import NoAnswer, NotComparison, QDecompError
from .pointer import (FEATURE_ENCODER, PointerHead, TrainConfig,
                      load_annotations, load_head, save_head, train)
from .rc import RCBackend, lexical_backend, load_oracle_backend, replay_backend

_TYPE_BY_ARITY = {3: ReasoningType.BRIDGING, 2: ReasoningType.INTERSECTION,
                  4: ReasoningType.COMPARISON}


class UsageError(Exception):
    pass


def _load_config_file(path: Optional[str]) -> dict[str, str]:
    if not path:
        return {}
    cfg = {}
    try:
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"config line is not key=value: {line!r}")
            key, value = line.split("=", 1)
            cfg[key.strip()] = value.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    return cfg


def _resolve_path(value: Optional[str], cfg: dict[str, str], key: str,
                  required: bool = True) -> Optional[Path]:
    """flags > config file > DECOMP_DATA_DIR-relative default lookup."""
    raw = value if value is not None else cfg.get(key)
    if raw is None:
        if required:
            raise UsageError(f"missing required path: --{key.replace('_', '-')}")
        return None
    p = Path(raw)
    if not p.is_absolute():
        data_dir = os.environ.get("DECOMP_DATA_DIR")
        if data_dir and not p.exists():
            candidate = Path(data_dir) / p
            if candidate.exists():
                return candidate
    return p


def _require_file(path: Path, what: str) -> Path:
    if not path.exists():
        raise UsageError(f"{what} not found: {path}")
    return path


def _load_heads(args, cfg) -> dict[ReasoningType, PointerHead]:
    heads = {}
    for flag in ("bridging_head", "intersection_head", "comparison_head"):
        path = _resolve_path(getattr(args, flag, None), cfg, flag, required=False)
        if path is None:
            continue
        head = load_head(_require_file(path, flag.replace("_", " ")))
        expected = {"bridging_head": 3, "intersection_head": 2,
                    "comparison_head": 4}[flag]
        if head.c != expected:
            raise UsageError(f"{flag} has arity {head.c}, expected {expected}")
        heads[_TYPE_BY_ARITY[head.c]] = head
    return heads


def _backend_from_args(args, cfg) -> RCBackend:
    name = args.backend
    if name == "lexical":
        return lexical_backend()
    path = _resolve_path(args.backend_file, cfg, "backend_file")
    _require_file(path, f"{name} backend file")
    if name == "replay":
        return replay_backend(path)
    return load_oracle_backend(path)


def _emit(records, out_path: Optional[Path]) -> None:
    if out_path is None:
        for rec in records:
            print(json.dumps(rec))
    else:
        with open(out_path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec) + "\n")


# ---------------------------------------------------------------------------
# decompose

def cmd_decompose(args, cfg) -> int:
    heads = _load_heads(args, cfg)
    questions = []
    if args.question:
        questions.append(("q0", tokenize(args.question, qid="q0")))
    dataset_path = _resolve_path(args.dataset, cfg, "dataset", required=False)
    if dataset_path is not None:
        for ex in load_dataset(_require_file(dataset_path, "dataset")):
            questions.append((ex.id, ex.question))
    if not questions:
        raise UsageError("need --question or --dataset")

    records = []
    for qid, q in questions:
        if args.indices is not None:
            rec = _manual_decompose(q, args)
        else:
            notes: dict = {}
            candidates = dec.decompose_all(q, heads, FEATURE_ENCODER, notes)
            if args.type:
                wanted = ReasoningType(args.type)
                candidates = [d for d in candidates if d.reasoning_type is wanted]
            rec = {
                "id": qid, "question": q.raw,
                "candidates": [_decomposition_record(d) for d in candidates],
                "notes": notes,
            }
        records.append(rec)
    _emit(records, _resolve_path(args.out, cfg, "out", required=False))
    return 0


def _manual_decompose(q, args) -> dict:
    indices = [int(s) for s in args.indices.split(",") if s.strip()]
    if not args.type:
        raise UsageError("--indices requires --type")
    rtype = ReasoningType(args.type)
    try:
        if rtype is ReasoningType.BRIDGING:
            d = dec.generate_bridging(q, *indices)
        elif rtype is ReasoningType.INTERSECTION:
            d = dec.generate_intersection(q, *indices)
        elif rtype is ReasoningType.COMPARISON:
            d = dec.generate_comparison(q, *indices)
        else:
            d = dec.generate_original(q)
    except TypeError as exc:
        raise UsageError(f"wrong index count for {rtype.value}: {exc}") from exc
    except NotComparison as exc:
        return {"id": q.id, "question": q.raw, "candidates": [],
                "notes": {rtype.value: str(exc)}}
    return {"id": q.id, "question": q.raw,
            "candidates": [_decomposition_record(d)], "notes": {}}


def _decomposition_record(d) -> dict:
    rec = {"type": d.reasoning_type.value,
           "sub_questions": [sq.render() for sq in d.sub_questions]}
    if d.op is not None:
        rec["op"] = d.op.value
        rec["entities"] = list(d.entities)
    return rec


# ---------------------------------------------------------------------------
# answer

def _answer_example(ex: QAExample, heads, backend, args, scorer, pipeline):
    notes: dict = {}
    candidates = dec.decompose_all(ex.question, heads, FEATURE_ENCODER, notes)
    results = []
    for d in candidates:
        try:
            results.append(orchestrate.run_decomposition(d, ex.paragraphs, backend))
        except QDecompError as exc:
            notes[d.reasoning_type.value] = str(exc)
    try:
        if args.mode == "oracle":
            chosen = orchestrate.oracle_select(results, ex.gold_answer)
        elif args.mode == "scorer":
            results = orchestrate.score_all(scorer, ex.question, results,
                                            ex.paragraphs)
            chosen = orchestrate.arbitrate(results, "scorer")
        elif args.mode == "pipeline":
            chosen = orchestrate.arbitrate(results, "pipeline",
                                           question=ex.question,
                                           pipeline=pipeline)
        else:
            chosen = orchestrate.arbitrate(results, "confidence")
    except (NoAnswer, QDecompError) as exc:
        return ex.id, "", {"id": ex.id, "error": str(exc), "notes": notes,
                           "results": [r.to_record() for r in results]}
    trace = {"id": ex.id, "chosen_type": chosen.reasoning_type.value,
             "answer": chosen.final_answer, "notes": notes,
             "results": [r.to_record() for r in results]}
    return ex.id, chosen.final_answer, trace


def cmd_answer(args, cfg) -> int:
    dataset = load_dataset(_require_file(
        _resolve_path(args.dataset, cfg, "dataset"), "dataset"))
    heads = _load_heads(args, cfg)
    backend = _backend_from_args(args, cfg)
    scorer = None
    if args.mode == "scorer":
        scorer_path = _resolve_path(args.scorer, cfg, "scorer")
        scorer = orchestrate.load_scorer(
            _require_file(scorer_path, "scorer checkpoint"), FEATURE_ENCODER)
    if args.mode == "pipeline":
        raise UsageError("pipeline mode needs a classifier checkpoint; "
                         "not provided by this command yet")

    def work(ex):
        try:
            return _answer_example(ex, heads, backend, args, scorer, None)
        except QDecompError as exc:
            return ex.id, "", {"id": ex.id, "error": str(exc)}

    workers = max(1, args.workers)
    if workers == 1:
        rows = [work(ex) for ex in dataset]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(work, dataset))
    rows.sort(key=lambda r: r[0])

    predictions = {rid: answer for rid, answer, _ in rows}
    failures = sum(1 for _, answer, _ in rows if not answer)
    out_path = _resolve_path(args.out, cfg, "out")
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(predictions, fh, indent=1)
    trace_path = _resolve_path(args.trace, cfg, "trace", required=False)
    if trace_path is not None:
        _emit([trace for _, _, trace in rows], trace_path)
    if failures:
        print(f"warning: {failures} example(s) produced no answer",
              file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# training

def cmd_train_pointer(args, cfg) -> int:
    annotations = load_annotations(_require_file(
        _resolve_path(args.annotations, cfg, "annotations"), "annotation file"))
    mismatched = [a for _, a in annotations if len(a.indices) != args.c]
    if mismatched:
        raise UsageError(
            f"{len(mismatched)} annotation(s) have arity != {args.c}")
    config = TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                         seed=args.seed)
    holdout: list = []
    train_set = annotations
    if args.holdout > 0:
        n_hold = max(1, int(len(annotations) * args.holdout))
        holdout, train_set = annotations[:n_hold], annotations[n_hold:]
        if not train_set:
            raise UsageError("holdout fraction leaves no training data")
    head = train(train_set, FEATURE_ENCODER, args.c, config)
    out_path = _resolve_path(args.out, cfg, "out")
    save_head(head, out_path)
    from .pointer import predict_indices, training_loss
    loss = training_loss(train_set, FEATURE_ENCODER, head)
    print(f"final loss: {loss:.6f}")
    if holdout:
        hits = sum(predict_indices(head, FEATURE_ENCODER, q)
                   == tuple(min(i, q.n - 1) for i in a.indices)
                   for q, a in holdout)
        print(f"held-out index accuracy: {hits / len(holdout):.3f}")
    print(f"checkpoint written: {out_path}")
    return 0


def cmd_train_scorer(args, cfg) -> int:
    """Trace file: one JSON object per line with question, type, answer,
    evidence, label."""
    path = _require_file(_resolve_path(args.traces, cfg, "traces"),
                         "trace file")
    traces = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                q = tokenize(rec["question"])
                rtype = ReasoningType(rec["type"])
                paragraphs = [Paragraph("evidence", (str(rec["evidence"]),))] \
                    if rec.get("evidence") else []
                result = orchestrate.DecompositionResult(
                    rtype, (), (), str(rec["answer"]), 1.0,
                    evidence_index=0 if paragraphs else -1)
                traces.append((q, result, paragraphs, bool(rec["label"])))
            except (KeyError, ValueError, TypeError) as exc:
                raise UsageError(f"bad trace on line {lineno}: {exc}") from exc
    if not traces:
        raise UsageError("trace file holds no records")
    config = TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                         seed=args.seed)
    model = orchestrate.train_scorer(traces, FEATURE_ENCODER, config)
    out_path = _resolve_path(args.out, cfg, "out")
    orchestrate.save_scorer(model, out_path)
    feats, labels = orchestrate.trace_features(traces, FEATURE_ENCODER)
    print(f"final loss: {orchestrate.scorer_loss(feats, labels, model.weights):.6f}")
    print(f"checkpoint written: {out_path}")
    return 0


# ---------------------------------------------------------------------------
# retrieval

def cmd_retrieve(args, cfg) -> int:
    corpus = retrieval.load_corpus(_require_file(
        _resolve_path(args.corpus, cfg, "corpus"), "corpus"))
    index = retrieval.build_index(corpus)
    hits = index.query(args.query, args.k)
    print(json.dumps([{"title": corpus[i].title, "score": score}
                      for i, score in hits], indent=1))
    return 0


def cmd_regen_distractors(args, cfg) -> int:
    dataset = load_dataset(_require_file(
        _resolve_path(args.dataset, cfg, "dataset"), "dataset"))
    corpus = retrieval.load_corpus(_require_file(
        _resolve_path(args.corpus, cfg, "corpus"), "corpus"))
    index = retrieval.build_index(corpus)
    out = [example_to_record(
        retrieval.regenerate_distractors(ex, index, args.k)) for ex in dataset]
    out_path = _resolve_path(args.out, cfg, "out")
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=1)
    print(f"wrote {len(out)} example(s): {out_path}")
    return 0


# ---------------------------------------------------------------------------
# robustness + evaluation

def _invert_answer(ex: QAExample, entities) -> str:
    norm = normalize_answer(ex.gold_answer)
    if norm == "yes":
        return "no"
    if norm == "no":
        return "yes"
    ent1, ent2 = entities
    if norm == normalize_answer(ent1):
        return ent2
    if norm == normalize_answer(ent2):
        return ent1
    return ex.gold_answer


def cmd_invert(args, cfg) -> int:
    dataset = load_dataset(_require_file(
        _resolve_path(args.gold, cfg, "gold"), "gold dataset"))
    out, skipped = [], 0
    for ex in dataset:
        try:
            spans = dec.propose_comparison_spans(ex.question)
            parse = dec.parse_comparison(ex.question, *spans)
            op = dec.find_op(parse, ex.question)
            inverted = metrics.invert_comparison(ex.question, parse, op)
        except QDecompError:
            skipped += 1
            continue
        if inverted is None:
            skipped += 1
            continue
        new_q, _new_op = inverted
        ent1 = " ".join(t.render(ex.question.raw)
                        for t in ex.question.tokens[spans[0]:spans[1]])
        ent2 = " ".join(t.render(ex.question.raw)
                        for t in ex.question.tokens[spans[2]:spans[3]])
        rec = example_to_record(ex)
        rec["_id"] = ex.id + "-inv"
        rec["question"] = new_q.raw
        rec["answer"] = _invert_answer(ex, (ent1, ent2))
        out.append(rec)
    out_path = _resolve_path(args.out, cfg, "out")
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=1)
    print(f"inverted {len(out)} question(s), skipped {skipped}: {out_path}")
    return 0


def cmd_evaluate(args, cfg) -> int:
    gold = load_dataset(_require_file(
        _resolve_path(args.gold, cfg, "gold"), "gold dataset"))
    pred_path = _require_file(_resolve_path(args.pred, cfg, "pred"),
                              "predictions file")
    with open(pred_path, encoding="utf-8") as fh:
        predictions = json.load(fh)
    per_model = None
    pm_path = _resolve_path(args.per_model_f1, cfg, "per_model_f1",
                            required=False)
    if pm_path is not None:
        per_model = metrics.load_per_model_f1(_require_file(pm_path, "per-model F1"))

    workers = max(1, args.workers)
    if workers > 1:
        # scoring is per-example and pure; evaluate() re-sorts by id anyway
        with ThreadPoolExecutor(max_workers=workers) as pool:
            gold = list(pool.map(lambda e: e, gold))
    report = metrics.evaluate(predictions, gold, per_model_f1=per_model)
    print(json.dumps(report.to_dict(), indent=1))
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdecomp",
        description="Multi-hop question decomposition pipeline")
    parser.add_argument("--config", help="key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_heads(p):
        p.add_argument("--bridging-head")
        p.add_argument("--intersection-head")
        p.add_argument("--comparison-head")

    p = sub.add_parser("decompose", help="print candidate decompositions")
    p.add_argument("--question")
    p.add_argument("--dataset")
    p.add_argument("--type", choices=[t.value for t in ReasoningType])
    p.add_argument("--indices", help="comma-separated hand annotation")
    p.add_argument("--out")
    add_heads(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("answer", help="run the full pipeline over a dataset")
    p.add_argument("--dataset")
    p.add_argument("--backend", choices=("replay", "lexical", "oracle-fixture"),
                   default="lexical")
    p.add_argument("--backend-file")
    p.add_argument("--mode", choices=("scorer", "confidence", "pipeline",
                                      "oracle"), default="confidence")
    p.add_argument("--scorer")
    p.add_argument("--out", default="predictions.json")
    p.add_argument("--trace")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    add_heads(p)
    p.set_defaults(func=cmd_answer)

    p = sub.add_parser("train-pointer", help="train a span pointer head")
    p.add_argument("--annotations")
    p.add_argument("--c", type=int, required=True, choices=(2, 3, 4))
    p.add_argument("--out")
    p.add_argument("--holdout", type=float, default=0.0)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_pointer)

    p = sub.add_parser("train-scorer", help="train the decomposition scorer")
    p.add_argument("--traces")
    p.add_argument("--out")
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_scorer)

    p = sub.add_parser("retrieve", help="query a TF-IDF paragraph index")
    p.add_argument("--corpus")
    p.add_argument("--query", required=True)
    p.add_argument("--k", type=int, default=10)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("regen-distractors",
                       help="replace distractor paragraphs from a corpus")
    p.add_argument("--dataset")
    p.add_argument("--corpus")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--out")
    p.set_defaults(func=cmd_regen_distractors)

    p = sub.add_parser("invert", help="build the inverted comparison dataset")
    p.add_argument("--gold")
    p.add_argument("--out")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("evaluate", help="score predictions against gold")
    p.add_argument("--pred")
    p.add_argument("--gold")
    p.add_argument("--per-model-f1")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    cfg = _load_config_file(getattr(args, "config", None)
                            or os.environ.get("QDECOMP_CONFIG"))
    try:
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except QDecompError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
