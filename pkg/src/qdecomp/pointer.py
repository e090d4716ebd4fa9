"""Span pointer: encode a question, produce a column-stochastic score matrix,
decode the monotone index tuple of maximal joint probability, and train heads
from span annotations.

The neural encoder is pluggable; a deterministic per-token feature encoder
ships for tests and desk-scale runs, and precomputed embeddings can be served
from a file.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .core import (ARTICLES, CONJUNCTIONS, WH_WORDS, ReasoningType,
                   TokenizedQuestion, tokenize)
from .errors import ArityError, MissingEmbedding, ParseError, ShapeError

VALID_ARITIES = (2, 3, 4)

_TYPE_BY_NAME = {
    "bridging": ReasoningType.BRIDGING,
    "intersection": ReasoningType.INTERSECTION,
    "comparison": ReasoningType.COMPARISON,
}


@dataclass(frozen=True)
class EncoderBackend:
    """Deterministic map from a tokenized question to an n-by-h embedding."""

    name: str
    h: int
    encode_fn: Callable[[TokenizedQuestion], np.ndarray]

    def encode(self, question: TokenizedQuestion) -> np.ndarray:
        emb = np.asarray(self.encode_fn(question), dtype=np.float64)
        if emb.ndim != 2 or emb.shape[1] != self.h:
            raise ShapeError(
                f"encoder {self.name!r} produced shape {emb.shape}, expected (*, {self.h})")
        if emb.shape[0] != question.n:
            raise ShapeError(
                f"encoder {self.name!r} produced {emb.shape[0]} rows for "
                f"{question.n} tokens")
        if not np.isfinite(emb).all():
            raise ShapeError(f"encoder {self.name!r} produced non-finite values")
        return emb


@dataclass(frozen=True)
class PointerHead:
    """Trainable h-by-c projection producing the pointer score matrix."""

    weights: np.ndarray
    c: int

    def __post_init__(self):
        if self.c not in VALID_ARITIES:
            raise ArityError(f"pointer arity must be one of {VALID_ARITIES}, got {self.c}")
        W = np.asarray(self.weights, dtype=np.float64)
        if W.ndim != 2 or W.shape[1] != self.c:
            raise ShapeError(f"head weights must be (h, {self.c}), got {W.shape}")
        if not np.isfinite(W).all():
            raise ShapeError("head weights must be finite")
        object.__setattr__(self, "weights", W)

    @property
    def h(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class SpanAnnotation:
    question_id: str
    reasoning_type: ReasoningType
    indices: tuple[int, ...]

    def validate(self, n: int) -> None:
        if self.reasoning_type is not None:
            c = self.reasoning_type.pointer_arity
            if c is None or len(self.indices) != c:
                raise ArityError(
                    f"annotation {self.question_id!r} has {len(self.indices)} "
                    f"indices for type {self.reasoning_type.value}")
        if any(not (0 <= i <= n) for i in self.indices):
            raise ArityError(f"annotation {self.question_id!r} indices out of [0, {n}]")
        if any(a > b for a, b in zip(self.indices, self.indices[1:])):
            raise ArityError(f"annotation {self.question_id!r} indices must be non-decreasing")


def score(head: PointerHead, emb: np.ndarray) -> np.ndarray:
    """Column-wise softmax of emb @ W over the n token positions."""
    emb = np.asarray(emb, dtype=np.float64)
    if emb.ndim != 2 or emb.shape[1] != head.h:
        raise ShapeError(f"embedding shape {emb.shape} does not match head h={head.h}")
    logits = emb @ head.weights
    logits -= logits.max(axis=0, keepdims=True)
    Y = np.exp(logits)
    Y /= Y.sum(axis=0, keepdims=True)
    return Y


def validate_score_matrix(Y: np.ndarray) -> np.ndarray:
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2:
        raise ShapeError("score matrix must be 2-D")
    if ((Y < 0) | (Y > 1)).any() or not np.allclose(Y.sum(axis=0), 1.0, atol=1e-6):
        raise ShapeError("score matrix columns must be stochastic")
    return Y


def decode(Y: np.ndarray) -> tuple[int, ...]:
    """The non-decreasing index tuple maximizing the joint column product,
    exact, with ties broken toward the lexicographically smallest tuple."""
    Y = validate_score_matrix(Y)
    return tuple(int(i) for i in _kernels.decode_kernel(Y))


# ---------------------------------------------------------------------------
# Deterministic feature encoder

HASH_BUCKETS = 64
FEATURE_WIDTH = HASH_BUCKETS + 8


def _bucket(text: str) -> int:
    return zlib.crc32(text.encode("utf-8")) % HASH_BUCKETS


def feature_encode(question: TokenizedQuestion) -> np.ndarray:
    """Per-token features: one hashed-identity bucket plus 8 flags
    (wh-word, article, capitalization, comma, conjunction, relative
    position, first, last)."""
    n = question.n
    emb = np.zeros((n, FEATURE_WIDTH))
    for i, tok in enumerate(question.tokens):
        emb[i, _bucket(tok.text)] = 1.0
        base = HASH_BUCKETS
        emb[i, base + 0] = 1.0 if tok.text in WH_WORDS else 0.0
        emb[i, base + 1] = 1.0 if tok.text in ARTICLES else 0.0
        emb[i, base + 2] = 1.0 if tok.cap else 0.0
        emb[i, base + 3] = 1.0 if tok.text == "," else 0.0
        emb[i, base + 4] = 1.0 if tok.text in CONJUNCTIONS else 0.0
        emb[i, base + 5] = i / (n - 1) if n > 1 else 0.0
        emb[i, base + 6] = 1.0 if i == 0 else 0.0
        emb[i, base + 7] = 1.0 if i == n - 1 else 0.0
    return emb


FEATURE_ENCODER = EncoderBackend("features", FEATURE_WIDTH, feature_encode)


# ---------------------------------------------------------------------------
# Training

@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 500
    seed: int = 0
    init_scale: float = 0.01


def _clamp_gold(indices: Sequence[int], n: int) -> list[int]:
    # Boundary annotations live in [0, n]; the score matrix has n rows, so an
    # index of n (span ending at the very last token) maps onto the terminal
    # token position n-1.
    return [min(i, n - 1) for i in indices]


def train(annotations: Sequence[tuple[TokenizedQuestion, SpanAnnotation]],
          encoder: EncoderBackend, c: int,
          config: TrainConfig = TrainConfig()) -> PointerHead:
    """Full-batch gradient descent on summed per-column cross-entropy.
    Returns the weights with the best training loss seen."""
    if c not in VALID_ARITIES:
        raise ArityError(f"pointer arity must be one of {VALID_ARITIES}, got {c}")
    if not annotations:
        raise ArityError("training requires at least one annotated example")
    embs, golds = [], []
    for question, ann in annotations:
        if len(ann.indices) != c:
            raise ArityError(
                f"annotation {ann.question_id!r} has {len(ann.indices)} "
                f"indices, expected c={c}")
        ann.validate(question.n)
        embs.append(encoder.encode(question))
        golds.append(_clamp_gold(ann.indices, question.n))
    offsets = np.zeros(len(embs) + 1, dtype=np.int64)
    np.cumsum([e.shape[0] for e in embs], out=offsets[1:])
    U = np.concatenate(embs, axis=0)
    gold = np.asarray(golds, dtype=np.int64)

    rng = np.random.default_rng(config.seed)
    W = rng.normal(scale=config.init_scale, size=(encoder.h, c))
    best_W, best_loss = W.copy(), np.inf
    for _ in range(config.epochs):
        loss, grad = _kernels.pointer_epoch(U, offsets, gold, W)
        if loss < best_loss:
            best_loss, best_W = loss, W.copy()
        W = W - config.learning_rate * grad
    loss, _ = _kernels.pointer_epoch(U, offsets, gold, W)
    if loss < best_loss:
        best_loss, best_W = loss, W.copy()
    return PointerHead(best_W, c)


def training_loss(annotations, encoder: EncoderBackend, head: PointerHead) -> float:
    """Current summed cross-entropy of a head on annotated examples."""
    embs, golds = [], []
    for question, ann in annotations:
        ann.validate(question.n)
        embs.append(encoder.encode(question))
        golds.append(_clamp_gold(ann.indices, question.n))
    offsets = np.zeros(len(embs) + 1, dtype=np.int64)
    np.cumsum([e.shape[0] for e in embs], out=offsets[1:])
    loss, _ = _kernels.pointer_epoch(
        np.concatenate(embs, axis=0), offsets,
        np.asarray(golds, dtype=np.int64), head.weights)
    return float(loss)


def predict_indices(head: PointerHead, encoder: EncoderBackend,
                    question: TokenizedQuestion) -> tuple[int, ...]:
    return decode(score(head, encoder.encode(question)))


# ---------------------------------------------------------------------------
# File formats

def load_annotations(path) -> list[tuple[TokenizedQuestion, SpanAnnotation]]:
    """One JSON object per line: question_id, question, type, indices."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                qid = rec["question_id"]
                rtype = _TYPE_BY_NAME[rec["type"]]
                indices = tuple(int(i) for i in rec["indices"])
                question = tokenize(rec["question"], qid=qid)
            except (KeyError, ValueError, TypeError) as exc:
                raise ParseError(f"bad annotation on line {lineno}: {exc}") from exc
            out.append((question, SpanAnnotation(qid, rtype, indices)))
    return out


def load_external_embeddings(path) -> EncoderBackend:
    """Serve stored n-by-h matrices keyed by question id."""
    table: dict[str, np.ndarray] = {}
    h = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                qid = rec["question_id"]
                rows = np.asarray(rec["rows"], dtype=np.float64)
                rec_h = int(rec["h"])
            except (KeyError, ValueError, TypeError) as exc:
                raise ParseError(f"bad embedding on line {lineno}: {exc}") from exc
            if rows.ndim != 2 or rows.shape[1] != rec_h:
                raise ShapeError(f"embedding for {qid!r} is not n x {rec_h}")
            if h is None:
                h = rec_h
            elif h != rec_h:
                raise ShapeError("embedding file mixes widths")
            table[qid] = rows
    if h is None:
        raise ParseError("embedding file holds no records")

    def lookup(question: TokenizedQuestion) -> np.ndarray:
        emb = table.get(question.id)
        if emb is None:
            raise MissingEmbedding(f"no stored embedding for id {question.id!r}")
        if emb.shape[0] != question.n:
            raise ShapeError(
                f"stored embedding for {question.id!r} has {emb.shape[0]} rows, "
                f"question has {question.n} tokens")
        return emb

    return EncoderBackend("external", h, lookup)


def save_head(head: PointerHead, path) -> None:
    payload = {"c": head.c, "h": head.h,
               "weights": [float(x) for x in head.weights.ravel()]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_head(path) -> PointerHead:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        c, h = int(payload["c"]), int(payload["h"])
        W = np.asarray(payload["weights"], dtype=np.float64).reshape(h, c)
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"bad head checkpoint: {exc}") from exc
    return PointerHead(W, c)
