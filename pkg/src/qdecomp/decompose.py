"""Sub-question generation: turn pointer indices into sub-questions for each
reasoning type, including the comparison parse, the discrete-operation
decision tree, and the entity-scoped rewrite rules."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .core import (ARTICLES, AUX_WORDS, WH_WORDS, Decomposition, ReasoningType,
                   SubQuestion, Token, TokenizedQuestion, ans_token,
                   detokenize, synthetic_word)
from .discrete_ops import DiscreteOp
from .errors import (NotComparison, QDecompError, RewriteError, SpanError,
                     UnsupportedComparison)

GREATER_KEYWORDS = frozenset(
    {"more", "most", "later", "last", "latest", "longer", "larger",
     "younger", "newer", "taller", "higher", "after"}
)
SMALLER_KEYWORDS = frozenset(
    {"less", "least", "fewer", "earlier", "earliest", "first", "shorter",
     "smaller", "older", "closer", "lower", "before"}
)
COMPARATIVE_KEYWORDS = GREATER_KEYWORDS | SMALLER_KEYWORDS

# Comparatives that turn the clause into a "when?" question rather than a
# "how many?" question.
TEMPORAL_KEYWORDS = frozenset(
    {"earlier", "later", "earliest", "latest", "first", "last",
     "before", "after"}
)

_ENTITY_WH = frozenset({"which", "who", "what"})
_CONNECTORS = frozenset({"of", "de", "la", "the"})

# Plural auxiliary -> singular form used when scoping a yes/no predicate to
# one entity ("Are A and B magazines?" -> "Is A magazines?").
_SINGULAR_AUX = {"are": "is", "were": "was", "do": "does", "have": "has"}


@dataclass(frozen=True)
class ComparisonParse:
    """Intermediates of the comparison decision tree, as token index spans."""

    entity1: tuple[int, int]
    entity2: tuple[int, int]
    coordination: Optional[int]
    preconjunct: Optional[int]
    head_entity: Optional[tuple[int, int]]
    is_yes_no: bool
    has_wh: bool
    keyword: Optional[int]


def _question_mark(q: TokenizedQuestion) -> list[Token]:
    return [synthetic_word("?")] if q.ends_with_question_mark() else []


_EDGE_PUNCT = frozenset({",", ".", "?", "!", ";", ":"})


def _strip_edges(tokens: list[Token]) -> list[Token]:
    # quotes and parentheses stay; they belong to a title or alias
    while tokens and tokens[0].text in _EDGE_PUNCT:
        tokens = tokens[1:]
    while tokens and tokens[-1].text in _EDGE_PUNCT:
        tokens = tokens[:-1]
    return tokens


def _finish(q: TokenizedQuestion, tokens: Sequence[Token]) -> SubQuestion:
    toks = _strip_edges(list(tokens))
    if not toks:
        raise SpanError("sub-question would be empty")
    return SubQuestion(tuple(toks + _question_mark(q)), q.raw)


def generate_bridging(q: TokenizedQuestion, ind1: int, ind2: int,
                      ind3: int) -> Decomposition:
    """q1 = the pointed span with its article turned into "which"; q2 = the
    remainder with the ANS placeholder spliced in."""
    n = q.n
    if not (0 <= ind1 <= ind2 <= ind3 <= n) or ind1 >= ind3 or ind2 >= ind3:
        raise SpanError(f"bad bridging indices ({ind1}, {ind2}, {ind3}) for n={n}")
    q1 = list(q.tokens[ind1:ind3])
    replaced = False
    for j in range(ind2 - 1, max(ind1, ind2 - 5) - 1, -1):
        if q.tokens[j].text in ARTICLES:
            q1[j - ind1] = synthetic_word("which")
            replaced = True
            break
    if not replaced:
        q1.insert(ind2 - ind1, synthetic_word("which"))
    q2 = list(q.tokens[:ind1]) + [ans_token()] + list(q.tokens[ind3:])
    # q2 may consist of the placeholder alone; _finish would strip it empty.
    q2_sub = SubQuestion(
        tuple(_strip_or_keep_ans(q2) + _question_mark(q)), q.raw)
    return Decomposition(ReasoningType.BRIDGING, (_finish(q, q1), q2_sub))


def _strip_or_keep_ans(tokens: list[Token]) -> list[Token]:
    while tokens and tokens[0].is_punct():
        tokens = tokens[1:]
    while tokens and tokens[-1].is_punct():
        tokens = tokens[:-1]
    if not tokens:
        raise SpanError("sub-question would be empty")
    return tokens


def generate_intersection(q: TokenizedQuestion, ind1: int, ind2: int) -> Decomposition:
    """Split the question into condition + entity-span + condition segments."""
    n = q.n
    if not (0 < ind1 < ind2 < n):
        raise SpanError(f"bad intersection indices ({ind1}, {ind2}) for n={n}")
    s1, s2, s3 = list(q.tokens[:ind1]), list(q.tokens[ind1:ind2]), list(q.tokens[ind2:])
    q1 = _finish(q, s1 + s2)
    if s2[0].text in WH_WORDS:
        q2 = _finish(q, s2 + s3)
    else:
        q2 = _finish(q, s1 + s3)
    return Decomposition(ReasoningType.INTERSECTION, (q1, q2))


def parse_comparison(q: TokenizedQuestion, ind1: int, ind2: int, ind3: int,
                     ind4: int) -> ComparisonParse:
    n = q.n
    if not (0 <= ind1 < ind2 <= ind3 < ind4 <= n):
        raise SpanError(f"bad comparison indices ({ind1}, {ind2}, {ind3}, {ind4})")

    def outside(i: int) -> bool:
        return not (ind1 <= i < ind2 or ind3 <= i < ind4)

    coordination = next(
        (i for i in range(ind2, ind3) if q.tokens[i].text in ("or", "and")), None)
    if coordination is None:
        # No coordination between the entities ("Did A occur before B?"):
        # fall back to the comparative keyword separating them.
        coordination = next(
            (i for i in range(ind2, ind3)
             if q.tokens[i].text in COMPARATIVE_KEYWORDS), None)
    if coordination is None:
        raise NotComparison("no coordination between the two entities")
    preconjunct = next(
        (i for i in range(n)
         if outside(i) and q.tokens[i].text in ("either", "both")), None)
    keyword = next(
        (i for i in range(n)
         if outside(i) and q.tokens[i].text in COMPARATIVE_KEYWORDS), None)
    has_wh = any(outside(i) and q.tokens[i].text in _ENTITY_WH for i in range(n))

    head_entity = None
    wh_pos = next(
        (i for i in range(ind1 - 1, -1, -1) if q.tokens[i].text in _ENTITY_WH), None)
    if wh_pos is not None:
        end = wh_pos + 1
        while (end < ind1 and not q.tokens[end].is_punct()
               and q.tokens[end].text not in AUX_WORDS
               and q.tokens[end].text not in _ENTITY_WH
               and q.tokens[end].text not in COMPARATIVE_KEYWORDS):
            end += 1
        if end > wh_pos + 1:  # the wh-word alone is not a head entity
            head_entity = (wh_pos, end)

    return ComparisonParse(
        entity1=(ind1, ind2), entity2=(ind3, ind4),
        coordination=coordination, preconjunct=preconjunct,
        head_entity=head_entity,
        is_yes_no=q.tokens[0].text in AUX_WORDS,
        has_wh=has_wh, keyword=keyword)


def find_op(parse: ComparisonParse, q: TokenizedQuestion) -> DiscreteOp:
    """Decision tree over keywords, head entity, and question form."""
    texts = [t.text for t in q.tokens]

    def outside(i: int) -> bool:
        return not (parse.entity1[0] <= i < parse.entity1[1]
                    or parse.entity2[0] <= i < parse.entity2[1])

    outside_texts = [texts[i] for i in range(q.n) if outside(i)]
    wh_present = parse.head_entity is not None or parse.has_wh

    if parse.keyword is not None:
        kw = texts[parse.keyword]
        if kw in GREATER_KEYWORDS:
            return DiscreteOp.WHICH_IS_GREATER if wh_present else DiscreteOp.IS_GREATER
        return DiscreteOp.WHICH_IS_SMALLER if wh_present else DiscreteOp.IS_SMALLER
    in_common = "common" in outside_texts or (
        not parse.is_yes_no and "same" in outside_texts)
    if in_common and not parse.is_yes_no:
        return DiscreteOp.INTERSECTION
    if wh_present:
        return DiscreteOp.WHICH_IS_TRUE
    if parse.is_yes_no:
        if "same" in outside_texts:
            return DiscreteOp.IS_EQUAL
        if "different" in outside_texts or "differ" in outside_texts:
            return DiscreteOp.NOT_EQUAL
        pre = texts[parse.preconjunct] if parse.preconjunct is not None else None
        if pre == "either" or (pre is None and texts[parse.coordination] == "or"):
            return DiscreteOp.OR
        if pre == "both" or texts[parse.coordination] == "and":
            return DiscreteOp.AND
    raise UnsupportedComparison("no discrete-operation branch applies")


def _predicate_tokens(q: TokenizedQuestion, parse: ComparisonParse) -> list[Token]:
    """The clause carrying the compared property: the richest of the segments
    before, between, and after the two entity spans."""
    i1, i2 = parse.entity1
    i3, i4 = parse.entity2
    drop = set()
    if parse.head_entity is not None:
        drop.update(range(*parse.head_entity))
    if parse.preconjunct is not None:
        drop.add(parse.preconjunct)
    if parse.coordination is not None:
        drop.add(parse.coordination)
    if parse.is_yes_no:
        drop.add(0)

    def seg(lo: int, hi: int, strip_wh: bool) -> list[Token]:
        toks = [q.tokens[i] for i in range(lo, hi)
                if i not in drop
                and not (strip_wh and q.tokens[i].text in _ENTITY_WH)]
        return _strip_edges(toks)

    before = seg(0, i1, strip_wh=True)
    middle = seg(i2, i3, strip_wh=False)
    after = seg(i4, q.n, strip_wh=True)
    return max((after, before, middle), key=len)


def form_subq(q: TokenizedQuestion, parse: ComparisonParse,
              op: DiscreteOp) -> tuple[SubQuestion, SubQuestion]:
    """Two entity-scoped sub-questions per the operation's rewrite rule."""
    predicate = _predicate_tokens(q, parse)
    ent1 = list(q.tokens[parse.entity1[0]:parse.entity1[1]])
    ent2 = list(q.tokens[parse.entity2[0]:parse.entity2[1]])

    if op.kind == "numeric":
        body = _numeric_body(q, parse, predicate)
    elif op.kind == "boolean":
        body = None  # assembled per entity below (auxiliary goes in front)
    else:
        body = _string_body(predicate)

    subqs = []
    for ent in (ent1, ent2):
        if op.kind == "boolean":
            toks = list(predicate)
            if parse.is_yes_no:
                aux = q.tokens[0].text
                lead = [synthetic_word(_SINGULAR_AUX.get(aux, aux))]
                subqs.append(_finish(q, lead + ent + toks))
            else:
                subqs.append(_finish(q, ent + toks))
        else:
            subqs.append(_finish(q, ent + list(body)))
    return subqs[0], subqs[1]


def _numeric_body(q: TokenizedQuestion, parse: ComparisonParse,
                  predicate: list[Token]) -> list[Token]:
    kw_pos = next((i for i, t in enumerate(predicate)
                   if t.text in COMPARATIVE_KEYWORDS), None)
    kw_text = (predicate[kw_pos].text if kw_pos is not None
               else (q.tokens[parse.keyword].text if parse.keyword is not None else None))
    if kw_text in TEMPORAL_KEYWORDS:
        body = [t for i, t in enumerate(predicate) if i != kw_pos]
        return body + [synthetic_word("when")]
    if kw_pos is not None and kw_pos + 1 < len(predicate):
        return (predicate[:kw_pos]
                + [synthetic_word("how"), synthetic_word("many")]
                + predicate[kw_pos + 1:])
    raise RewriteError(
        f"no value-question rewrite for comparative {kw_text!r}",
        pattern=kw_text)


def _string_body(predicate: list[Token]) -> list[Token]:
    pos = next((i for i, t in enumerate(predicate)
                if t.text in ("same", "different")), None)
    if pos is None:
        return list(predicate)
    body = list(predicate)
    body[pos] = synthetic_word("which")
    if pos > 0 and body[pos - 1].text in ARTICLES:
        del body[pos - 1]
    return body


def generate_comparison(q: TokenizedQuestion, ind1: int, ind2: int, ind3: int,
                        ind4: int) -> Decomposition:
    parse = parse_comparison(q, ind1, ind2, ind3, ind4)
    op = find_op(parse, q)
    q1, q2 = form_subq(q, parse, op)
    ent1 = detokenize(q.tokens[ind1:ind2], q.raw)
    ent2 = detokenize(q.tokens[ind3:ind4], q.raw)
    return Decomposition(ReasoningType.COMPARISON, (q1, q2),
                         op=op, entities=(ent1, ent2))


def generate_original(q: TokenizedQuestion) -> Decomposition:
    return Decomposition(
        ReasoningType.ORIGINAL,
        (SubQuestion(tuple(q.tokens), q.raw),))


# ---------------------------------------------------------------------------
# Bootstrap entity proposer (stands in for a trained 4-point pointer)

def propose_comparison_spans(q: TokenizedQuestion) -> tuple[int, int, int, int]:
    """Capitalized token runs flanking the coordination (or, failing that,
    the comparative keyword)."""
    texts = [t.text for t in q.tokens]
    pivot = next((i for i, t in enumerate(texts) if t == "or"), None)
    allow_and = pivot is not None
    if pivot is None:
        pivot = next((i for i, t in enumerate(texts) if t == "and"), None)
    if pivot is None:
        pivot = next((i for i, t in enumerate(texts)
                      if t in COMPARATIVE_KEYWORDS), None)
    if pivot is None:
        raise NotComparison("no coordination or comparative keyword")

    left = _expand_left(q, pivot)
    right = _expand_right(q, pivot, allow_and)
    if left is None or right is None:
        raise NotComparison("no capitalized entity run beside the coordination")
    return left[0], left[1], right[0], right[1]


def _entity_cap(q: TokenizedQuestion, i: int) -> bool:
    # sentence-initial aux/wh words are capitalized but never entity words
    tok = q.tokens[i]
    if i == 0 and (tok.text in AUX_WORDS or tok.text in WH_WORDS):
        return False
    return tok.cap


def _expand_left(q: TokenizedQuestion, pivot: int) -> Optional[tuple[int, int]]:
    anchor = next((i for i in range(pivot - 1, -1, -1) if _entity_cap(q, i)), None)
    if anchor is None:
        return None
    start = anchor
    while start > 0 and (_entity_cap(q, start - 1)
                         or q.tokens[start - 1].text in _CONNECTORS):
        start -= 1
    while not _entity_cap(q, start) and q.tokens[start].text != "the":
        start += 1
    return start, anchor + 1


def _expand_right(q: TokenizedQuestion, pivot: int,
                  allow_and: bool) -> Optional[tuple[int, int]]:
    anchor = None
    for i in range(pivot + 1, q.n):
        if q.tokens[i].cap:
            anchor = i
            break
        if not (q.tokens[i].text in _CONNECTORS):
            break
    if anchor is None:
        return None
    start = anchor
    while start > pivot + 1 and q.tokens[start - 1].text == "the":
        start -= 1
    end = anchor + 1
    connectors = set(_CONNECTORS) | ({"and"} if allow_and else set())
    while end < q.n:
        if q.tokens[end].cap:
            end += 1
        elif (q.tokens[end].text in connectors and end + 1 < q.n
              and q.tokens[end + 1].cap):
            end += 2
        elif (q.tokens[end].text == "." and end + 1 < q.n
              and q.tokens[end + 1].cap and q.tokens[end - 1].cap):
            # abbreviated middle initial: "Alfred L. Werker"
            end += 1
        else:
            break
    return start, end


def decompose_all(q: TokenizedQuestion, heads: dict, encoder,
                  notes: Optional[dict] = None) -> list[Decomposition]:
    """One candidate decomposition per reasoning type; per-type failures are
    recorded in ``notes`` rather than raised.  Original is always present."""
    from .pointer import predict_indices  # local import avoids a cycle

    if notes is None:
        notes = {}
    out: list[Decomposition] = []

    head = heads.get(ReasoningType.BRIDGING)
    if head is not None:
        try:
            i1, i2, i3 = predict_indices(head, encoder, q)
            out.append(generate_bridging(q, i1, i2, i3))
        except QDecompError as exc:
            notes[ReasoningType.BRIDGING.value] = str(exc)
    else:
        notes[ReasoningType.BRIDGING.value] = "no pointer head"

    head = heads.get(ReasoningType.INTERSECTION)
    if head is not None:
        try:
            i1, i2 = predict_indices(head, encoder, q)
            out.append(generate_intersection(q, i1, i2))
        except QDecompError as exc:
            notes[ReasoningType.INTERSECTION.value] = str(exc)
    else:
        notes[ReasoningType.INTERSECTION.value] = "no pointer head"

    try:
        head = heads.get(ReasoningType.COMPARISON)
        if head is not None:
            i1, i2, i3, i4 = predict_indices(head, encoder, q)
        else:
            i1, i2, i3, i4 = propose_comparison_spans(q)
        out.append(generate_comparison(q, i1, i2, i3, i4))
    except QDecompError as exc:
        notes[ReasoningType.COMPARISON.value] = str(exc)

    out.append(generate_original(q))
    return out
