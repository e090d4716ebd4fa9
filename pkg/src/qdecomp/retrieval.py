"""Sparse TF-IDF retrieval over a paragraph corpus, plus distractor
regeneration for multi-hop examples."""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Paragraph, QAExample, normalize_answer, tokenize
from .errors import EmptyCorpus, InsufficientDistractors, ParseError

N_BUCKETS = 1 << 20


def _terms(text: str) -> list[str]:
    return [t.text for t in tokenize(text).tokens if not t.is_punct()]


def feature_ids(text: str) -> list[int]:
    """Unigram and bigram feature ids; bigrams are crc32-hashed into a fixed
    bucket space so the vocabulary stays bounded."""
    terms = _terms(text)
    ids = [zlib.crc32(t.encode("utf-8")) % N_BUCKETS for t in terms]
    for a, b in zip(terms, terms[1:]):
        ids.append(zlib.crc32(f"{a} {b}".encode("utf-8")) % N_BUCKETS)
    return ids


def _tf(count: int) -> float:
    return 1.0 + np.log(count)


@dataclass
class TfIdfIndex:
    paragraphs: list[Paragraph]
    idf: dict[int, float] = field(repr=False)
    vectors: list[dict[int, float]] = field(repr=False)

    def __len__(self) -> int:
        return len(self.paragraphs)

    def vectorize(self, text: str) -> dict[int, float]:
        counts: dict[int, int] = {}
        for fid in feature_ids(text):
            counts[fid] = counts.get(fid, 0) + 1
        vec = {fid: _tf(c) * self.idf.get(fid, self._default_idf)
               for fid, c in counts.items()}
        norm = np.sqrt(sum(w * w for w in vec.values()))
        if norm > 0:
            vec = {fid: w / norm for fid, w in vec.items()}
        return vec

    @property
    def _default_idf(self) -> float:
        # a feature absent from every document
        return float(np.log((1 + len(self.paragraphs)) / 1.0) + 1.0)

    def query(self, text: str, k: int) -> list[tuple[int, float]]:
        """Top-k (paragraph index, cosine) pairs, score-descending with index
        as the tie-break."""
        if not self.paragraphs:
            raise EmptyCorpus("index holds no paragraphs")
        if k <= 0:
            return []
        qvec = self.vectorize(text)
        scores = np.zeros(len(self.paragraphs))
        for i, dvec in enumerate(self.vectors):
            scores[i] = sum(w * dvec.get(fid, 0.0) for fid, w in qvec.items())
        order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
        return [(i, float(scores[i])) for i in order[:k]]


def build_index(paragraphs: Sequence[Paragraph]) -> TfIdfIndex:
    paragraphs = list(paragraphs)
    if not paragraphs:
        raise EmptyCorpus("cannot index an empty corpus")
    doc_features = []
    doc_freq: dict[int, int] = {}
    for p in paragraphs:
        counts: dict[int, int] = {}
        for fid in feature_ids(p.text):
            counts[fid] = counts.get(fid, 0) + 1
        doc_features.append(counts)
        for fid in counts:
            doc_freq[fid] = doc_freq.get(fid, 0) + 1
    n = len(paragraphs)
    idf = {fid: float(np.log((1 + n) / (1 + df)) + 1.0)
           for fid, df in doc_freq.items()}
    vectors = []
    for counts in doc_features:
        vec = {fid: _tf(c) * idf[fid] for fid, c in counts.items()}
        norm = np.sqrt(sum(w * w for w in vec.values()))
        if norm > 0:
            vec = {fid: w / norm for fid, w in vec.items()}
        vectors.append(vec)
    return TfIdfIndex(paragraphs, idf, vectors)


def load_corpus(path) -> list[Paragraph]:
    """One JSON object per line: {"title": ..., "sentences": [...]}."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                out.append(Paragraph(title=str(rec["title"]),
                                     sentences=tuple(str(s) for s in rec["sentences"])))
            except (KeyError, ValueError, TypeError) as exc:
                raise ParseError(f"bad corpus record on line {lineno}: {exc}") from exc
    return out


def _contains_answer(paragraph: Paragraph, answer: str) -> bool:
    norm = normalize_answer(answer)
    if not norm:
        return False
    return norm in normalize_answer(paragraph.text)


def regenerate_distractors(example: QAExample, index: TfIdfIndex,
                           n_distractors: int = 8) -> QAExample:
    """Replace the example's non-gold paragraphs with fresh corpus paragraphs
    ranked by similarity to the question, excluding the example's own
    paragraphs and anything containing the gold answer."""
    banned_titles = {p.title for p in example.paragraphs}
    gold_titles = {t for t, _ in example.supporting_facts}
    ranked = index.query(example.question.raw, len(index))
    chosen: list[Paragraph] = []
    for i, _score in ranked:
        cand = index.paragraphs[i]
        if cand.title in banned_titles or cand.title in {c.title for c in chosen}:
            continue
        if example.gold_answer not in ("yes", "no") and _contains_answer(
                cand, example.gold_answer):
            continue
        chosen.append(cand)
        if len(chosen) == n_distractors:
            break
    if len(chosen) < n_distractors:
        raise InsufficientDistractors(
            f"needed {n_distractors} distractors, found {len(chosen)}")
    new_paragraphs = tuple(p for p in example.paragraphs if p.title in gold_titles)
    new_paragraphs = new_paragraphs + tuple(chosen)
    return QAExample(
        id=example.id, question=example.question, paragraphs=new_paragraphs,
        gold_answer=example.gold_answer,
        supporting_facts=example.supporting_facts,
        hotpot_type=example.hotpot_type, level=example.level)
