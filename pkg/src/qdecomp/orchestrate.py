"""Three-step pipeline: run every candidate decomposition against a
single-hop backend, recombine hop answers per reasoning type, and arbitrate
between the per-type answers (learned scorer, confidence and pipeline
baselines, plus an oracle upper bound)."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .core import (TYPE_ORDER, Decomposition, Paragraph, ReasoningType, Token,
                   TokenizedQuestion, detokenize, normalize_answer,
                   render_question, tokenize)
from .discrete_ops import apply, parse_value
from .errors import (DegenerateTraining, NoAnswer, NoContext, QDecompError,
                     ShapeError)
from .pointer import EncoderBackend, TrainConfig
from .rc import AnswerCandidate, ParagraphScores, RCBackend, select_answer
from .rc import paragraph_tokens as _ptokens

TYPE_SENTINELS = {
    ReasoningType.BRIDGING: "[TYPE-B]",
    ReasoningType.INTERSECTION: "[TYPE-I]",
    ReasoningType.COMPARISON: "[TYPE-C]",
    ReasoningType.ORIGINAL: "[TYPE-O]",
}
ANS_SEP = "[ANS-SEP]"
EVID_SEP = "[EVID-SEP]"
EVIDENCE_BUDGET = 300  # max serialized evidence tokens


@dataclass(frozen=True)
class DecompositionResult:
    reasoning_type: ReasoningType
    sub_questions: tuple[str, ...]
    hop_answers: tuple[AnswerCandidate, ...]
    final_answer: str
    confidence: float
    evidence_index: int = -1
    arbiter_score: Optional[float] = None
    error: Optional[str] = None
    low_confidence: bool = False

    @property
    def failed(self) -> bool:
        return self.error is not None or not self.final_answer

    def to_record(self) -> dict:
        return {
            "type": self.reasoning_type.value,
            "sub_questions": list(self.sub_questions),
            "hop_answers": [a.text for a in self.hop_answers],
            "final_answer": self.final_answer,
            "confidence": self.confidence,
            "evidence_index": self.evidence_index,
            "arbiter_score": self.arbiter_score,
            "error": self.error,
            "low_confidence": self.low_confidence,
        }


def _failed(reasoning_type: ReasoningType, subqs: Sequence[str],
            message: str) -> DecompositionResult:
    return DecompositionResult(reasoning_type, tuple(subqs), (), "", 0.0,
                               error=message)


def _answer_one(question_text: str, paragraphs: Sequence[Paragraph],
                backend: RCBackend) -> AnswerCandidate:
    return select_answer(backend(question_text, paragraphs), paragraphs)


# ---------------------------------------------------------------------------
# Per-type runners

def run_bridging(d: Decomposition, paragraphs: Sequence[Paragraph],
                 backend: RCBackend) -> DecompositionResult:
    """Answer hop 1, splice its answer over the placeholder, answer hop 2."""
    assert d.reasoning_type is ReasoningType.BRIDGING
    q1_text = d.sub_questions[0].render()
    try:
        hop1 = _answer_one(q1_text, paragraphs, backend)
    except QDecompError as exc:
        return _failed(d.reasoning_type, [q1_text], f"hop 1: {exc}")
    q2 = d.sub_questions[1]
    # the whole hop-1 answer becomes one verbatim token, punctuation included
    splice = Token(hop1.text.lower(), -1, -1, surface=hop1.text)
    q2_tokens = tuple(splice if t.is_ans else t for t in q2.tokens)
    q2_text = render_question(q2_tokens, q2.source_raw)
    try:
        hop2 = _answer_one(q2_text, paragraphs, backend)
    except QDecompError as exc:
        return _failed(d.reasoning_type, [q1_text, q2_text], f"hop 2: {exc}")
    return DecompositionResult(
        d.reasoning_type, (q1_text, q2_text), (hop1, hop2), hop2.text,
        min(hop1.confidence, hop2.confidence), evidence_index=hop2.paragraph_index)


def candidate_for_paragraph(sc: ParagraphScores,
                            paragraph: Paragraph) -> AnswerCandidate:
    """Best candidate of a single paragraph, same scoring rule as
    select_answer restricted to one paragraph."""
    return select_answer([sc], [paragraph])


def run_intersection(d: Decomposition, paragraphs: Sequence[Paragraph],
                     backend: RCBackend) -> DecompositionResult:
    assert d.reasoning_type is ReasoningType.INTERSECTION
    texts = [sq.render() for sq in d.sub_questions]
    try:
        cand_sets = []
        for text in texts:
            scores = backend(text, paragraphs)
            cands = []
            for sc, p in zip(scores, paragraphs):
                # paragraphs the backend judged unanswerable contribute no
                # candidate; otherwise both sets always share every paragraph
                if sc.y_none >= max(sc.y_span, sc.y_yes, sc.y_no):
                    continue
                cands.append(candidate_for_paragraph(sc, p))
            cand_sets.append(cands)
    except QDecompError as exc:
        return _failed(d.reasoning_type, texts, str(exc))

    def best_by_key(cands):
        table: dict[str, AnswerCandidate] = {}
        for c in cands:
            key = normalize_answer(c.text)
            if not key:
                continue
            if key not in table or c.confidence > table[key].confidence:
                table[key] = c
        return table

    set1, set2 = best_by_key(cand_sets[0]), best_by_key(cand_sets[1])
    common = set(set1) & set(set2)
    if common:
        key = max(common,
                  key=lambda k: (set1[k].confidence + set2[k].confidence, k))
        a, b = set1[key], set2[key]
        winner = a if a.confidence >= b.confidence else b
        return DecompositionResult(
            d.reasoning_type, tuple(texts), (a, b), winner.text,
            min(a.confidence, b.confidence),
            evidence_index=winner.paragraph_index)
    # disjoint candidate sets: degrade to the single best guess
    fallback = max(list(set1.values()) + list(set2.values()),
                   key=lambda c: c.confidence, default=None)
    if fallback is None:
        return _failed(d.reasoning_type, texts, "no candidates produced")
    return DecompositionResult(
        d.reasoning_type, tuple(texts), (fallback,), fallback.text,
        fallback.confidence / 2.0, evidence_index=fallback.paragraph_index,
        low_confidence=True)


def run_comparison(d: Decomposition, paragraphs: Sequence[Paragraph],
                   backend: RCBackend) -> DecompositionResult:
    assert d.reasoning_type is ReasoningType.COMPARISON
    texts = [sq.render() for sq in d.sub_questions]
    try:
        hop1 = _answer_one(texts[0], paragraphs, backend)
        hop2 = _answer_one(texts[1], paragraphs, backend)
    except QDecompError as exc:
        return _failed(d.reasoning_type, texts, str(exc))
    ent1, ent2 = d.entities
    try:
        v1 = parse_value(hop1.text, d.op.kind)
        v2 = parse_value(hop2.text, d.op.kind)
        answer = apply(d.op, ent1, v1, ent2, v2)
    except QDecompError as exc:
        return DecompositionResult(
            d.reasoning_type, tuple(texts), (hop1, hop2), "", 0.0,
            error=f"discrete op: {exc}")
    evidence = hop1 if hop1.confidence >= hop2.confidence else hop2
    return DecompositionResult(
        d.reasoning_type, tuple(texts), (hop1, hop2), answer,
        min(hop1.confidence, hop2.confidence),
        evidence_index=evidence.paragraph_index)


def run_original(d: Decomposition, paragraphs: Sequence[Paragraph],
                 backend: RCBackend) -> DecompositionResult:
    assert d.reasoning_type is ReasoningType.ORIGINAL
    text = d.sub_questions[0].render()
    try:
        hop = _answer_one(text, paragraphs, backend)
    except NoContext:
        raise
    except QDecompError as exc:
        return _failed(d.reasoning_type, [text], str(exc))
    return DecompositionResult(
        d.reasoning_type, (text,), (hop,), hop.text, hop.confidence,
        evidence_index=hop.paragraph_index)


_RUNNERS = {
    ReasoningType.BRIDGING: run_bridging,
    ReasoningType.INTERSECTION: run_intersection,
    ReasoningType.COMPARISON: run_comparison,
    ReasoningType.ORIGINAL: run_original,
}


def run_decomposition(d: Decomposition, paragraphs: Sequence[Paragraph],
                      backend: RCBackend) -> DecompositionResult:
    return _RUNNERS[d.reasoning_type](d, paragraphs, backend)


# ---------------------------------------------------------------------------
# Decomposition scorer

@dataclass(frozen=True)
class ScorerModel:
    encoder: EncoderBackend
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (self.encoder.h,) or not np.isfinite(w).all():
            raise ShapeError(f"scorer weights must be finite with shape "
                             f"({self.encoder.h},), got {w.shape}")
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class PipelineClassifier:
    """Predicts the reasoning type from the question alone."""

    encoder: EncoderBackend
    weights: np.ndarray  # h x 4, columns in TYPE_ORDER

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (self.encoder.h, 4) or not np.isfinite(w).all():
            raise ShapeError(f"pipeline weights must be finite with shape "
                             f"({self.encoder.h}, 4), got {w.shape}")
        object.__setattr__(self, "weights", w)

    def type_scores(self, question: TokenizedQuestion) -> np.ndarray:
        pooled = self.encoder.encode(question).max(axis=0)
        logits = pooled @ self.weights
        z = logits - logits.max()
        e = np.exp(z)
        return e / e.sum()


def serialize_result(question: TokenizedQuestion, result: DecompositionResult,
                     paragraphs: Sequence[Paragraph],
                     budget: int = EVIDENCE_BUDGET) -> str:
    """Question, type sentinel, answer and truncated evidence joined into one
    string the encoder can consume."""
    evidence = ""
    if 0 <= result.evidence_index < len(paragraphs):
        ptoks = _ptokens(paragraphs[result.evidence_index])
        evidence = detokenize(ptoks.tokens[:budget], ptoks.raw)
    pieces = [question.raw, TYPE_SENTINELS[result.reasoning_type],
              ANS_SEP, result.final_answer or "[NONE]", EVID_SEP]
    if evidence:
        pieces.append(evidence)
    return " ".join(pieces)


def _pooled_feature(model_encoder: EncoderBackend, text: str) -> np.ndarray:
    return model_encoder.encode(tokenize(text)).max(axis=0)


def score_decomposition(model: ScorerModel, question: TokenizedQuestion,
                        result: DecompositionResult,
                        paragraphs: Sequence[Paragraph]) -> float:
    x = _pooled_feature(model.encoder, serialize_result(question, result, paragraphs))
    return float(1.0 / (1.0 + np.exp(-(model.weights @ x))))


def score_all(model: ScorerModel, question: TokenizedQuestion,
              results: Sequence[DecompositionResult],
              paragraphs: Sequence[Paragraph]) -> list[DecompositionResult]:
    return [replace(r, arbiter_score=score_decomposition(model, question, r, paragraphs))
            for r in results]


# ---------------------------------------------------------------------------
# Arbitration

_ORDER_KEY = {t: i for i, t in enumerate(TYPE_ORDER)}

ARBITRATION_MODES = ("scorer", "confidence", "pipeline")


def arbitrate(results: Sequence[DecompositionResult], mode: str,
              question: Optional[TokenizedQuestion] = None,
              pipeline: Optional[PipelineClassifier] = None,
              ) -> DecompositionResult:
    """Pick one result.  Ties break by the fixed type order bridging >
    intersection > comparison > original."""
    if mode not in ARBITRATION_MODES:
        raise ValueError(f"unknown arbitration mode {mode!r}")
    live = [r for r in results if not r.failed]
    if not live:
        raise NoAnswer("every reasoning type failed")
    if mode == "scorer":
        for r in live:
            if r.arbiter_score is None:
                raise ValueError("scorer mode requires arbiter scores; "
                                 "run score_all first")
        return max(live, key=lambda r: (r.arbiter_score,
                                        -_ORDER_KEY[r.reasoning_type]))
    if mode == "confidence":
        return max(live, key=lambda r: (r.confidence,
                                        -_ORDER_KEY[r.reasoning_type]))
    if question is None or pipeline is None:
        raise ValueError("pipeline mode requires the question and a classifier")
    probs = pipeline.type_scores(question)
    ranked = sorted(range(4), key=lambda i: (-probs[i], i))
    by_type = {r.reasoning_type: r for r in live}
    for i in ranked:
        r = by_type.get(TYPE_ORDER[i])
        if r is not None:
            return r
    raise NoAnswer("pipeline classifier matched no live result")


def oracle_select(results: Sequence[DecompositionResult],
                  gold_answer: str) -> DecompositionResult:
    """Upper bound: the result whose answer scores best against gold."""
    from .metrics import token_f1
    live = [r for r in results if not r.failed]
    if not live:
        raise NoAnswer("every reasoning type failed")
    return max(live, key=lambda r: (token_f1(r.final_answer, gold_answer),
                                    -_ORDER_KEY[r.reasoning_type]))


# ---------------------------------------------------------------------------
# Scorer training

def scorer_loss(features: np.ndarray, labels: np.ndarray,
                weights: np.ndarray) -> float:
    """Mean binary cross-entropy of sigmoid(features @ weights)."""
    z = features @ weights
    # log(1 + exp(-z)) computed stably
    return float(np.mean(np.logaddexp(0.0, -z) + (1.0 - labels) * z))


def scorer_gradient(features: np.ndarray, labels: np.ndarray,
                    weights: np.ndarray) -> np.ndarray:
    p = 1.0 / (1.0 + np.exp(-(features @ weights)))
    return features.T @ (p - labels) / len(labels)


def trace_features(traces, encoder: EncoderBackend) -> tuple[np.ndarray, np.ndarray]:
    """Pooled features and labels from (question, result, paragraphs, label)
    training traces."""
    feats, labels = [], []
    for question, result, paragraphs, label in traces:
        text = serialize_result(question, result, paragraphs)
        feats.append(_pooled_feature(encoder, text))
        labels.append(1.0 if label else 0.0)
    return np.asarray(feats), np.asarray(labels)


def train_scorer(traces, encoder: EncoderBackend,
                 config: TrainConfig = TrainConfig()) -> ScorerModel:
    """Full-batch gradient descent on BCE over serialized traces.  Traces are
    (question, result, paragraphs, correct?) tuples."""
    features, labels = trace_features(traces, encoder)
    if len(labels) == 0:
        raise ValueError("scorer training requires at least one trace")
    if labels.min() == labels.max():
        warnings.warn("all scorer labels share one class; model is best-effort",
                      DegenerateTraining)
    rng = np.random.default_rng(config.seed)
    w = rng.normal(0.0, config.init_scale, size=encoder.h)
    best_w, best_loss = w.copy(), scorer_loss(features, labels, w)
    for _ in range(config.epochs):
        w = w - config.learning_rate * scorer_gradient(features, labels, w)
        loss = scorer_loss(features, labels, w)
        if loss < best_loss:
            best_loss, best_w = loss, w.copy()
    return ScorerModel(encoder, best_w)


def save_scorer(model: ScorerModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"h": model.encoder.h, "weights": model.weights.tolist()}, fh)


def load_scorer(path, encoder: EncoderBackend) -> ScorerModel:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("h") != encoder.h:
        raise ShapeError(f"checkpoint width {data.get('h')} does not match "
                         f"encoder width {encoder.h}")
    return ScorerModel(encoder, np.asarray(data["weights"], dtype=np.float64))
