"""Tokenization, shared question/answer types, and HotpotQA-format ingestion.

Every span operation in the library works over offset-preserving token
sequences produced here.  Real tokens carry character offsets into the raw
question; synthetic tokens (the ANS placeholder, inserted interrogatives,
appended punctuation) carry sentinel offsets and render with single-space
separation.
"""

from __future__ import annotations

import json
import re
import string
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

from .errors import EmptyQuestion, ParseError

PUNCT_CHARS = frozenset(".,?!'\"():;")

WH_WORDS = frozenset(
    {"what", "which", "who", "whom", "whose", "where", "when", "why", "how"}
)
ARTICLES = frozenset({"a", "an", "the"})
AUX_WORDS = frozenset(
    {"is", "are", "was", "were", "do", "does", "did",
     "has", "have", "had", "can", "could", "will", "would"}
)
CONJUNCTIONS = frozenset({"and", "or"})

_SENTINEL = -1


@dataclass(frozen=True)
class Token:
    """One word or punctuation mark, lowercased, with offsets into the raw text.

    Synthetic tokens (placeholder, inserted words) use char_start == char_end
    == -1 and render through ``surface``.
    """

    text: str
    char_start: int
    char_end: int
    cap: bool = False
    is_ans: bool = False
    surface: Optional[str] = None

    @property
    def synthetic(self) -> bool:
        return self.char_start < 0

    def is_punct(self) -> bool:
        return bool(self.text) and all(c in PUNCT_CHARS for c in self.text)

    def render(self, raw: str) -> str:
        if self.synthetic:
            return self.surface if self.surface is not None else self.text
        return raw[self.char_start:self.char_end]


def ans_token() -> Token:
    """The reserved ANS placeholder; a token type, not the literal string."""
    return Token("<ans>", _SENTINEL, _SENTINEL, is_ans=True, surface="ANS")


def synthetic_word(text: str) -> Token:
    """A synthetic word token rendered verbatim with single-space separation."""
    return Token(text.lower(), _SENTINEL, _SENTINEL, surface=text)


@dataclass(frozen=True)
class TokenizedQuestion:
    id: str
    raw: str
    tokens: tuple[Token, ...]

    def __post_init__(self):
        if len(self.tokens) < 1:
            raise EmptyQuestion("a question must contain at least one token")
        prev_end = -1
        for tok in self.tokens:
            if tok.synthetic:
                raise ParseError("synthetic tokens are not allowed in a question")
            if tok.char_start >= tok.char_end:
                raise ParseError("token offsets must satisfy start < end")
            if tok.char_start < prev_end:
                raise ParseError("tokens must be non-overlapping and increasing")
            prev_end = tok.char_end

    @property
    def n(self) -> int:
        return len(self.tokens)

    def ends_with_question_mark(self) -> bool:
        return self.tokens[-1].text == "?"


def tokenize(raw: str, qid: str = "") -> TokenizedQuestion:
    """Split on whitespace, then peel leading/trailing punctuation into
    separate tokens.  Internal apostrophes stay attached ("Classic's")."""
    stripped = raw.strip()
    if not stripped:
        raise EmptyQuestion("empty question")
    tokens: list[Token] = []
    for match in re.finditer(r"\S+", stripped):
        s, e = match.span()
        while s < e and stripped[s] in PUNCT_CHARS:
            tokens.append(Token(stripped[s], s, s + 1))
            s += 1
        trailing: list[tuple[int, int]] = []
        while e > s and stripped[e - 1] in PUNCT_CHARS:
            trailing.append((e - 1, e))
            e -= 1
        if s < e:
            word = stripped[s:e]
            tokens.append(Token(word.lower(), s, e, cap=word[0].isupper()))
        for a, b in reversed(trailing):
            tokens.append(Token(stripped[a], a, b))
    return TokenizedQuestion(qid, stripped, tuple(tokens))


def detokenize(tokens: Sequence[Token], raw: str) -> str:
    """Render tokens back to text.

    Runs of offset-bearing tokens that are still in raw order reproduce the
    original inter-token spacing exactly; everywhere else a single space is
    used, except that no space precedes a punctuation-only token and none
    follows an opening parenthesis.
    """
    pieces: list[str] = []
    prev: Optional[Token] = None
    for tok in tokens:
        if prev is not None:
            sep = None
            if not prev.synthetic and not tok.synthetic and prev.char_end <= tok.char_start:
                gap = raw[prev.char_end:tok.char_start]
                if gap == "" or gap.isspace():
                    sep = gap
            if sep is None:
                if tok.is_punct() or (prev is not None and prev.text == "("):
                    sep = ""
                else:
                    sep = " "
            pieces.append(sep)
        pieces.append(tok.render(raw))
        prev = tok
    return "".join(pieces)


def render_question(tokens: Sequence[Token], raw: str) -> str:
    """Detokenize and capitalize the sentence-initial character."""
    text = detokenize(tokens, raw)
    if text and text[0].isalpha():
        text = text[0].upper() + text[1:]
    return text


class ReasoningType(Enum):
    BRIDGING = "bridging"
    INTERSECTION = "intersection"
    COMPARISON = "comparison"
    ORIGINAL = "original"

    @property
    def pointer_arity(self) -> Optional[int]:
        return {"bridging": 3, "intersection": 2, "comparison": 4}.get(self.value)


# Fixed tie-break order used by arbitration and by per-type iteration.
TYPE_ORDER = (
    ReasoningType.BRIDGING,
    ReasoningType.INTERSECTION,
    ReasoningType.COMPARISON,
    ReasoningType.ORIGINAL,
)


@dataclass(frozen=True)
class SubQuestion:
    """A single-hop question, possibly containing the ANS placeholder."""

    tokens: tuple[Token, ...]
    source_raw: str
    has_placeholder: bool = field(default=False)

    def __post_init__(self):
        n_ans = sum(1 for t in self.tokens if t.is_ans)
        if n_ans > 1:
            raise ParseError("the ANS placeholder may occur at most once")
        object.__setattr__(self, "has_placeholder", n_ans == 1)

    def render(self) -> str:
        return render_question(self.tokens, self.source_raw)


@dataclass(frozen=True)
class Paragraph:
    title: str
    sentences: tuple[str, ...]

    def __post_init__(self):
        if not self.title:
            raise ParseError("paragraph title must be non-empty")
        if not self.sentences:
            raise ParseError("paragraph must contain at least one sentence")

    @property
    def text(self) -> str:
        return " ".join(self.sentences)


@dataclass(frozen=True)
class Decomposition:
    """A reasoning type plus its sub-questions and optional discrete op."""

    reasoning_type: ReasoningType
    sub_questions: tuple[SubQuestion, ...]
    op: object = None              # DiscreteOp for comparison
    entities: Optional[tuple] = None  # pair of (entity text) strings

    def __post_init__(self):
        t, subqs = self.reasoning_type, self.sub_questions
        if t is ReasoningType.BRIDGING:
            if len(subqs) != 2 or not subqs[1].has_placeholder:
                raise ParseError("bridging needs 2 sub-questions, second with ANS")
        elif t is ReasoningType.INTERSECTION:
            if len(subqs) != 2 or any(q.has_placeholder for q in subqs):
                raise ParseError("intersection needs 2 placeholder-free sub-questions")
        elif t is ReasoningType.COMPARISON:
            if len(subqs) != 2 or self.op is None or self.entities is None:
                raise ParseError("comparison needs 2 sub-questions, an op and entities")
        elif t is ReasoningType.ORIGINAL:
            if len(subqs) != 1:
                raise ParseError("original keeps exactly the question itself")


@dataclass(frozen=True)
class QAExample:
    id: str
    question: TokenizedQuestion
    paragraphs: tuple[Paragraph, ...]
    gold_answer: str
    supporting_facts: tuple[tuple[str, int], ...]
    hotpot_type: str   # "bridge" | "comparison"
    level: str         # "easy" | "medium" | "hard"

    def __post_init__(self):
        if self.paragraphs:
            titles = {p.title: p for p in self.paragraphs}
            for title, sent_idx in self.supporting_facts:
                para = titles.get(title)
                if para is None:
                    raise ParseError(
                        f"supporting fact title {title!r} names no paragraph",
                        record_id=self.id)
                if not (0 <= sent_idx < len(para.sentences)):
                    raise ParseError(
                        f"supporting fact index {sent_idx} out of bounds for {title!r}",
                        record_id=self.id)

    def gold_paragraphs(self) -> tuple[Paragraph, ...]:
        gold_titles = {t for t, _ in self.supporting_facts}
        return tuple(p for p in self.paragraphs if p.title in gold_titles)


_REQUIRED_FIELDS = ("_id", "question", "answer", "type", "level",
                    "supporting_facts")


def example_from_record(record: dict) -> QAExample:
    rid = record.get("_id", "<unknown>")
    for key in _REQUIRED_FIELDS:
        if key not in record:
            raise ParseError(f"record {rid!r} missing field {key!r}", record_id=rid)
    if record["type"] not in ("bridge", "comparison"):
        raise ParseError(f"record {rid!r} has unknown type {record['type']!r}",
                         record_id=rid)
    if record["level"] not in ("easy", "medium", "hard"):
        raise ParseError(f"record {rid!r} has unknown level {record['level']!r}",
                         record_id=rid)
    try:
        question = tokenize(record["question"], qid=rid)
    except EmptyQuestion as exc:
        raise ParseError(f"record {rid!r} has an empty question", record_id=rid) from exc
    paragraphs = []
    for ctx in record.get("context", []):
        try:
            title, sentences = ctx
            paragraphs.append(Paragraph(str(title), tuple(str(s) for s in sentences)))
        except (ValueError, TypeError, ParseError) as exc:
            raise ParseError(f"record {rid!r} has a malformed context entry",
                             record_id=rid) from exc
    facts = []
    for sf in record["supporting_facts"]:
        try:
            title, idx = sf
            facts.append((str(title), int(idx)))
        except (ValueError, TypeError) as exc:
            raise ParseError(f"record {rid!r} has a malformed supporting fact",
                             record_id=rid) from exc
    return QAExample(
        id=str(rid),
        question=question,
        paragraphs=tuple(paragraphs),
        gold_answer=str(record["answer"]),
        supporting_facts=tuple(facts),
        hotpot_type=record["type"],
        level=record["level"],
    )


def load_dataset(path) -> list[QAExample]:
    """Load a HotpotQA-format JSON array.  Order is preserved; missing
    context (full wiki mode) is permitted."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ParseError("dataset file must hold a top-level JSON array")
    return [example_from_record(rec) for rec in data]


def example_to_record(ex: QAExample) -> dict:
    return {
        "_id": ex.id,
        "question": ex.question.raw,
        "answer": ex.gold_answer,
        "type": ex.hotpot_type,
        "level": ex.level,
        "supporting_facts": [[t, i] for t, i in ex.supporting_facts],
        "context": [[p.title, list(p.sentences)] for p in ex.paragraphs],
    }


def save_dataset(examples: Iterable[QAExample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([example_to_record(ex) for ex in examples], fh, indent=1)


_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_answer(text: str) -> str:
    """SQuAD-style normalization: lowercase, strip punctuation and articles,
    collapse whitespace.  Shared by the metric, discrete-op and orchestration
    modules."""
    text = text.lower().translate(_PUNCT_TABLE)
    words = [w for w in text.split() if w not in ARTICLES]
    return " ".join(words)
