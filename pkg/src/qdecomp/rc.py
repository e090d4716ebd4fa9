"""Single-hop reading comprehension contract: per-paragraph four-way scores
plus span distributions, cross-paragraph selection by lowest no-answer score,
and three interchangeable backends (replay, lexical, oracle fixture)."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (ARTICLES, AUX_WORDS, WH_WORDS, Paragraph, Token,
                   TokenizedQuestion, detokenize, normalize_answer,
                   synthetic_word, tokenize)
from .errors import MissingScores, NoContext, ParseError

_KINDS = ("span", "yes", "no")


@dataclass(frozen=True)
class ParagraphScores:
    y_span: float
    y_yes: float
    y_no: float
    y_none: float
    p_start: np.ndarray
    p_end: np.ndarray
    paragraph_index: int

    def __post_init__(self):
        for name in ("p_start", "p_end"):
            p = np.asarray(getattr(self, name), dtype=np.float64)
            if p.ndim != 1 or (p < 0).any() or abs(p.sum() - 1.0) > 1e-6:
                raise ParseError(f"{name} must be a probability vector")
            object.__setattr__(self, name, p)


@dataclass(frozen=True)
class AnswerCandidate:
    kind: str
    text: str
    confidence: float
    paragraph_index: int
    start: int = -1
    end: int = -1


@dataclass(frozen=True)
class RCBackend:
    """Scores one rendered sub-question against every paragraph."""

    name: str
    score_fn: Callable[[str, Sequence[Paragraph]], list[ParagraphScores]]

    def __call__(self, question_text: str,
                 paragraphs: Sequence[Paragraph]) -> list[ParagraphScores]:
        scores = self.score_fn(question_text, paragraphs)
        if len(scores) != len(paragraphs):
            raise ParseError(
                f"backend {self.name!r} returned {len(scores)} score blocks "
                f"for {len(paragraphs)} paragraphs")
        return scores


def paragraph_tokens(paragraph: Paragraph) -> TokenizedQuestion:
    return tokenize(paragraph.text, qid=paragraph.title)


def best_span(p_start: np.ndarray, p_end: np.ndarray) -> tuple[int, int]:
    """argmax over j <= k of p_start[j] * p_end[k], smallest pair on ties."""
    best_j = best_k = 0
    best_v = -1.0
    run_j = 0  # argmax of p_start over [0, k], first maximum
    for k in range(len(p_start)):
        if p_start[k] > p_start[run_j]:
            run_j = k
        v = p_start[run_j] * p_end[k]
        if v > best_v:
            best_v, best_j, best_k = v, run_j, k
    return best_j, best_k


def _softmax(values: np.ndarray) -> np.ndarray:
    z = values - values.max()
    e = np.exp(z)
    return e / e.sum()


def select_answer(scores: Sequence[ParagraphScores],
                  paragraphs: Sequence[Paragraph]) -> AnswerCandidate:
    """Pick the paragraph with the lowest no-answer score, then the best of
    {span, yes, no} there."""
    if not scores or not paragraphs:
        raise NoContext("no paragraphs to answer from")
    idx = min(range(len(scores)), key=lambda i: (scores[i].y_none, i))
    sc = scores[idx]
    class_scores = np.array([sc.y_span, sc.y_yes, sc.y_no, sc.y_none])
    kind = _KINDS[int(np.argmax(class_scores[:3]))]
    confidence = float(_softmax(class_scores)[_KINDS.index(kind)])
    if kind != "span":
        return AnswerCandidate(kind, kind, confidence, sc.paragraph_index)
    j, k = best_span(sc.p_start, sc.p_end)
    ptoks = paragraph_tokens(paragraphs[idx])
    text = detokenize(ptoks.tokens[j:k + 1], ptoks.raw)
    confidence *= float(sc.p_start[j] * sc.p_end[k])
    return AnswerCandidate("span", text, confidence, sc.paragraph_index,
                           start=j, end=k)


# ---------------------------------------------------------------------------
# Replay backend

def subq_key(question_text: str) -> str:
    return hashlib.sha256(question_text.encode("utf-8")).hexdigest()


def write_score_file(records: list[tuple[str, ParagraphScores]], path) -> None:
    """Persist (sub-question text, scores) pairs in the replay format."""
    with open(path, "w", encoding="utf-8") as fh:
        for question_text, sc in records:
            fh.write(json.dumps({
                "subq_sha256": subq_key(question_text),
                "paragraph_index": sc.paragraph_index,
                "y": [sc.y_span, sc.y_yes, sc.y_no, sc.y_none],
                "p_start": sc.p_start.tolist(),
                "p_end": sc.p_end.tolist(),
            }) + "\n")


def replay_backend(path) -> RCBackend:
    table: dict[tuple[str, int], ParagraphScores] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                key = (rec["subq_sha256"], int(rec["paragraph_index"]))
                y = [float(v) for v in rec["y"]]
                if len(y) != 4:
                    raise ValueError("y must have 4 entries")
                scores = ParagraphScores(
                    y[0], y[1], y[2], y[3],
                    np.asarray(rec["p_start"], dtype=np.float64),
                    np.asarray(rec["p_end"], dtype=np.float64),
                    paragraph_index=key[1])
            except (KeyError, ValueError, TypeError) as exc:
                raise ParseError(f"bad score record on line {lineno}: {exc}") from exc
            table[key] = scores

    def score(question_text: str, paragraphs: Sequence[Paragraph]):
        digest = subq_key(question_text)
        out = []
        for i in range(len(paragraphs)):
            sc = table.get((digest, i))
            if sc is None:
                raise MissingScores(
                    f"no stored scores for sub-question {question_text!r}, "
                    f"paragraph {i}")
            out.append(sc)
        return out

    return RCBackend("replay", score)


# ---------------------------------------------------------------------------
# Lexical backend

_NUMERIC_RE = re.compile(r"\d")
_STOP = ARTICLES | AUX_WORDS | WH_WORDS | {"of", "in", "on", "at", "for",
                                           "to", "and", "or", "the"}
_NEGATION_CUES = frozenset({"not", "never", "no", "none", "neither"})


def _content_terms(text: str) -> list[str]:
    toks = tokenize(text).tokens
    return [t.text for t in toks if not t.is_punct() and t.text not in _STOP]


def lexical_backend(span_max: int = 4, window: int = 8) -> RCBackend:
    """TF-IDF overlap stand-in for a neural single-hop model.

    The no-answer score is one minus the question/paragraph cosine; the span
    distributions peak on the token window with the best question-term
    overlap, typed by the question's wh-word.
    """

    def score(question_text: str, paragraphs: Sequence[Paragraph]):
        q_terms = _content_terms(question_text)
        q_set = set(q_terms)
        q_lower = question_text.lower()
        wants_number = "when" in q_lower or "how many" in q_lower or "what year" in q_lower
        wants_entity = any(w in q_lower.split() for w in ("who", "which", "whom"))

        para_tokens = [paragraph_tokens(p) for p in paragraphs]
        doc_freq: dict[str, int] = {}
        for pt in para_tokens:
            for term in {t.text for t in pt.tokens if not t.is_punct()}:
                doc_freq[term] = doc_freq.get(term, 0) + 1
        n_docs = max(len(paragraphs), 1)

        def idf(term: str) -> float:
            return np.log((1 + n_docs) / (1 + doc_freq.get(term, 0))) + 1.0

        out = []
        for idx, pt in enumerate(para_tokens):
            terms = [t.text for t in pt.tokens if not t.is_punct()]
            counts: dict[str, int] = {}
            for t in terms:
                counts[t] = counts.get(t, 0) + 1
            # cosine between tf-idf vectors restricted to observed terms
            q_counts: dict[str, int] = {}
            for t in q_terms:
                q_counts[t] = q_counts.get(t, 0) + 1
            dot = sum((1 + np.log(counts[t])) * idf(t) ** 2 * (1 + np.log(q_counts[t]))
                      for t in q_counts if t in counts)
            q_norm = np.sqrt(sum(((1 + np.log(c)) * idf(t)) ** 2
                                 for t, c in q_counts.items()))
            d_norm = np.sqrt(sum(((1 + np.log(c)) * idf(t)) ** 2
                                 for t, c in counts.items()))
            cos = float(dot / (q_norm * d_norm)) if q_norm > 0 and d_norm > 0 else 0.0
            cos = min(cos, 1.0)

            n = len(pt.tokens)
            context = np.zeros(n)
            for i, tok in enumerate(pt.tokens):
                lo, hi = max(0, i - window), min(n, i + window + 1)
                context[i] = sum(idf(pt.tokens[j].text)
                                 for j in range(lo, hi)
                                 if pt.tokens[j].text in q_set)
            token_score = np.zeros(n)
            for i, tok in enumerate(pt.tokens):
                if tok.is_punct():
                    continue
                s = context[i]
                if tok.text in q_set:
                    s *= 0.25  # answers echoing the question are unlikely
                if wants_number and _NUMERIC_RE.search(tok.text):
                    s = s * 2.0 + 1.0
                if wants_entity and tok.cap:
                    s = s * 1.5 + 0.5
                token_score[i] = s
            best_s, best_e, best_v = 0, 0, -1.0
            for s_i in range(n):
                for e_i in range(s_i, min(n, s_i + span_max)):
                    v = token_score[s_i:e_i + 1].sum() / (e_i - s_i + 1) ** 0.5
                    if v > best_v:
                        best_v, best_s, best_e = v, s_i, e_i
            p_start = np.full(n, 0.1 / n)
            p_end = np.full(n, 0.1 / n)
            p_start[best_s] += 0.9
            p_end[best_e] += 0.9

            has_negation = any(t in _NEGATION_CUES for t in terms)
            out.append(ParagraphScores(
                y_span=cos, y_yes=0.05, y_no=0.1 if has_negation else 0.01,
                y_none=1.0 - cos, p_start=p_start, p_end=p_end,
                paragraph_index=idx))
        return out

    return RCBackend("lexical", score)


# ---------------------------------------------------------------------------
# Oracle fixture backend

def oracle_backend(answers: dict[str, str]) -> RCBackend:
    """Serve fixed answers keyed by normalized sub-question text; evidence is
    the first paragraph containing the answer (or the question terms for
    yes/no answers)."""

    table = {normalize_answer(k): v for k, v in answers.items()}

    def score(question_text: str, paragraphs: Sequence[Paragraph]):
        answer = table.get(normalize_answer(question_text))
        if answer is None:
            raise MissingScores(f"no oracle answer for {question_text!r}")
        norm_answer = normalize_answer(answer)
        out = []
        chosen = None
        spans: dict[int, tuple[int, int]] = {}
        for idx, p in enumerate(paragraphs):
            pt = paragraph_tokens(p)
            target = norm_answer.split()
            match = _find_subsequence([t.text for t in pt.tokens], target)
            if match is not None and chosen is None:
                chosen = idx
                spans[idx] = match
        if chosen is None:
            # yes/no or unlocatable answer: back the paragraph sharing the
            # most question terms.
            overlaps = [len(set(_content_terms(question_text))
                            & set(_content_terms(p.text)))
                        for p in paragraphs]
            chosen = int(np.argmax(overlaps)) if paragraphs else 0
        for idx, p in enumerate(paragraphs):
            pt = paragraph_tokens(p)
            n = pt.n
            p_start = np.full(n, 1.0 / n)
            p_end = np.full(n, 1.0 / n)
            y = {"y_span": 0.1, "y_yes": 0.0, "y_no": 0.0,
                 "y_none": 0.99 if idx != chosen else 0.01}
            if idx == chosen:
                if norm_answer == "yes":
                    y["y_yes"] = 5.0
                elif norm_answer == "no":
                    y["y_no"] = 5.0
                else:
                    y["y_span"] = 5.0
                    s, e = spans.get(idx, (0, n - 1))
                    p_start = np.full(n, 0.02 / n)
                    p_end = np.full(n, 0.02 / n)
                    p_start[s] += 0.98
                    p_end[e] += 0.98
            out.append(ParagraphScores(
                y["y_span"], y["y_yes"], y["y_no"], y["y_none"],
                p_start, p_end, paragraph_index=idx))
        return out

    return RCBackend("oracle-fixture", score)


def _find_subsequence(haystack: list[str], needle: list[str]) -> Optional[tuple[int, int]]:
    if not needle:
        return None
    for i in range(len(haystack) - len(needle) + 1):
        if haystack[i:i + len(needle)] == needle:
            return i, i + len(needle) - 1
    return None


def load_oracle_backend(path) -> RCBackend:
    with open(path, encoding="utf-8") as fh:
        mapping = json.load(fh)
    if not isinstance(mapping, dict):
        raise ParseError("oracle fixture must be a JSON object")
    return oracle_backend({str(k): str(v) for k, v in mapping.items()})


# ---------------------------------------------------------------------------
# Question noise augmentation

def augment_question(tokens: Sequence[Token], rng_seed: int,
                     drop_prob: float = 0.05,
                     wh_prob: float = 0.05) -> tuple[Token, ...]:
    """Drop tokens and degrade wh-words with small independent probabilities;
    deterministic under the seed."""
    rng = np.random.default_rng(rng_seed)
    out: list[Token] = []
    for tok in tokens:
        if drop_prob > 0 and rng.random() < drop_prob:
            continue
        if tok.text in WH_WORDS and wh_prob > 0 and rng.random() < wh_prob:
            out.append(synthetic_word("the"))
        else:
            out.append(tok)
    if not out:
        out = [tokens[0]]
    return tuple(out)
