"""Evaluation: SQuAD-style token F1 / exact match, split reports, the
example-wise joint F1, and the adversarial comparison-question inverter."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .core import (AUX_WORDS, QAExample, Token, TokenizedQuestion,
                   normalize_answer, render_question, synthetic_word,
                   tokenize)
from .decompose import ComparisonParse
from .discrete_ops import DiscreteOp, dual
from .errors import InversionError, ParseError

_YES_NO = ("yes", "no")


def token_f1(prediction: str, gold: str) -> float:
    pred_n, gold_n = normalize_answer(prediction), normalize_answer(gold)
    if pred_n in _YES_NO or gold_n in _YES_NO:
        return float(pred_n == gold_n)
    pred_toks, gold_toks = pred_n.split(), gold_n.split()
    if not pred_toks and not gold_toks:
        return 1.0
    if not pred_toks or not gold_toks:
        return 0.0
    common = Counter(pred_toks) & Counter(gold_toks)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_toks)
    recall = overlap / len(gold_toks)
    return 2 * precision * recall / (precision + recall)


def exact_match(prediction: str, gold: str) -> float:
    return float(normalize_answer(prediction) == normalize_answer(gold))


def joint_f1(orig_f1: float, inv_f1: float) -> float:
    for v in (orig_f1, inv_f1):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"F1 value out of range: {v}")
    return min(orig_f1, inv_f1)


# ---------------------------------------------------------------------------
# Splits

def load_per_model_f1(path) -> dict[str, tuple[float, float, float]]:
    """One JSON object per line: {"id": ..., "f1": [a, b, c]} from three
    single-hop-trained model runs."""
    table = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                vals = tuple(float(v) for v in rec["f1"])
                if len(vals) != 3:
                    raise ValueError("need exactly 3 F1 values")
                table[str(rec["id"])] = vals
            except (KeyError, ValueError, TypeError) as exc:
                raise ParseError(f"bad per-model F1 row on line {lineno}: {exc}") from exc
    return table


def split_single_multi(examples: Sequence[QAExample],
                       per_model_f1: dict[str, tuple[float, float, float]],
                       ) -> tuple[set[str], set[str]]:
    """Single = ids where every single-hop model scored above zero."""
    single, multi = set(), set()
    for ex in examples:
        row = per_model_f1.get(ex.id)
        if row is None:
            raise ParseError(f"no per-model F1 row for example {ex.id!r}",
                             record_id=ex.id)
        (single if all(v > 0 for v in row) else multi).add(ex.id)
    return single, multi


# ---------------------------------------------------------------------------
# Comparison-question inversion

# Involutive antonym table for comparative keywords.  Words with no clean
# antonym in the keyword sets (taller, newer, closer, fewer) are excluded;
# hitting them raises InversionError.
ANTONYMS = {
    "more": "less", "less": "more",
    "most": "least", "least": "most",
    "later": "earlier", "earlier": "later",
    "latest": "earliest", "earliest": "latest",
    "last": "first", "first": "last",
    "longer": "shorter", "shorter": "longer",
    "larger": "smaller", "smaller": "larger",
    "younger": "older", "older": "younger",
    "higher": "lower", "lower": "higher",
    "before": "after", "after": "before",
    "same": "different", "different": "same",
}

_EQUALITY_TRIGGER = {DiscreteOp.IS_EQUAL: "same", DiscreteOp.NOT_EQUAL: "different"}


def _retokenized(q: TokenizedQuestion, tokens: list[Token]) -> TokenizedQuestion:
    return tokenize(render_question(tokens, q.raw), qid=q.id)


def invert_comparison(q: TokenizedQuestion, parse: ComparisonParse,
                      op: DiscreteOp,
                      ) -> Optional[tuple[TokenizedQuestion, DiscreteOp]]:
    """Flip the comparative trigger word so the gold answer flips; absent for
    the non-invertible ops (And, Or, Intersection)."""
    new_op = dual(op)
    if new_op is None:
        return None
    tokens = list(q.tokens)
    if op is DiscreteOp.WHICH_IS_TRUE:
        return _toggle_negation(q, parse, tokens), new_op
    if op in _EQUALITY_TRIGGER:
        trigger = _EQUALITY_TRIGGER[op]
        idx = next((i for i, t in enumerate(tokens) if t.text == trigger), None)
    else:
        idx = parse.keyword
    if idx is None:
        raise InversionError(f"no trigger keyword found for {op.value}")
    word = tokens[idx].text
    if word not in ANTONYMS:
        raise InversionError(f"keyword {word!r} has no antonym")
    tokens[idx] = synthetic_word(ANTONYMS[word])
    return _retokenized(q, tokens), new_op


def _toggle_negation(q: TokenizedQuestion, parse: ComparisonParse,
                     tokens: list[Token]) -> TokenizedQuestion:
    # negate (or un-negate) the predicate after the first auxiliary outside
    # the entity spans
    spans = [range(*parse.entity1), range(*parse.entity2)]
    for i, tok in enumerate(tokens):
        if any(i in s for s in spans):
            continue
        if tok.text in AUX_WORDS:
            if i + 1 < len(tokens) and tokens[i + 1].text == "not":
                del tokens[i + 1]
            else:
                tokens.insert(i + 1, synthetic_word("not"))
            return _retokenized(q, tokens)
    raise InversionError("no auxiliary to negate for WhichIsTrue inversion")


# ---------------------------------------------------------------------------
# Reports

@dataclass(frozen=True)
class ExampleScore:
    id: str
    f1: float
    em: float
    chosen_type: str = ""
    missing: bool = False


@dataclass(frozen=True)
class EvalReport:
    overall_f1: float
    overall_em: float
    split_f1: dict[str, float]
    split_counts: dict[str, int]
    records: tuple[ExampleScore, ...] = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "overall_f1": self.overall_f1,
            "overall_em": self.overall_em,
            "split_f1": dict(self.split_f1),
            "split_counts": dict(self.split_counts),
            "n_examples": len(self.records),
            "n_missing": sum(1 for r in self.records if r.missing),
            "records": [{"id": r.id, "f1": r.f1, "em": r.em,
                         "chosen_type": r.chosen_type, "missing": r.missing}
                        for r in self.records],
        }


def evaluate(predictions: dict[str, str], gold: Sequence[QAExample],
             per_model_f1: Optional[dict[str, tuple[float, float, float]]] = None,
             chosen_types: Optional[dict[str, str]] = None) -> EvalReport:
    records = []
    for ex in gold:
        pred = predictions.get(ex.id)
        missing = pred is None
        f1 = 0.0 if missing else token_f1(pred, ex.gold_answer)
        em = 0.0 if missing else exact_match(pred, ex.gold_answer)
        chosen = (chosen_types or {}).get(ex.id, "")
        records.append(ExampleScore(ex.id, f1, em, chosen, missing))
    records.sort(key=lambda r: r.id)
    n = len(records)
    overall_f1 = sum(r.f1 for r in records) / n if n else 0.0
    overall_em = sum(r.em for r in records) / n if n else 0.0

    by_id = {r.id: r for r in records}
    splits: dict[str, list[str]] = {
        "bridge": [ex.id for ex in gold if ex.hotpot_type == "bridge"],
        "comparison": [ex.id for ex in gold if ex.hotpot_type == "comparison"],
    }
    if per_model_f1 is not None:
        single, multi = split_single_multi(gold, per_model_f1)
        splits["single"] = sorted(single)
        splits["multi"] = sorted(multi)
    split_f1 = {}
    split_counts = {}
    for name, ids in splits.items():
        split_counts[name] = len(ids)
        split_f1[name] = (sum(by_id[i].f1 for i in ids) / len(ids)) if ids else 0.0
    return EvalReport(overall_f1, overall_em, split_f1, split_counts,
                      tuple(records))
