"""The ten-operation comparison calculus: value parsing, evaluation, and the
dual (inversion) map over the seven invertible operations."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .core import normalize_answer
from .errors import AmbiguousComparison, TypeMismatch, ValueParseError


class DiscreteOp(Enum):
    IS_GREATER = "is_greater"
    IS_SMALLER = "is_smaller"
    WHICH_IS_GREATER = "which_is_greater"
    WHICH_IS_SMALLER = "which_is_smaller"
    AND = "and"
    OR = "or"
    WHICH_IS_TRUE = "which_is_true"
    IS_EQUAL = "is_equal"
    NOT_EQUAL = "not_equal"
    INTERSECTION = "intersection"

    @property
    def kind(self) -> str:
        if self in _NUMERIC_OPS:
            return "numeric"
        if self in _LOGICAL_OPS:
            return "boolean"
        return "text"


_NUMERIC_OPS = frozenset({DiscreteOp.IS_GREATER, DiscreteOp.IS_SMALLER,
                          DiscreteOp.WHICH_IS_GREATER, DiscreteOp.WHICH_IS_SMALLER})
_LOGICAL_OPS = frozenset({DiscreteOp.AND, DiscreteOp.OR, DiscreteOp.WHICH_IS_TRUE})


@dataclass(frozen=True)
class ComparableValue:
    kind: str            # numeric | boolean | text
    source: str
    numeric: Optional[float] = None
    boolean: Optional[bool] = None
    text: Optional[str] = None


_NUMBER_RE = re.compile(r"\d+(?:\.\d+)?")


def parse_value(answer: str, expected: str) -> ComparableValue:
    """Coerce an RC answer string to the kind a discrete operation consumes.

    Numeric answers prefer a 4-digit token (a year inside a date), falling
    back to the first number in the string.
    """
    if not answer or not answer.strip():
        raise ValueParseError("empty answer string")
    if expected == "numeric":
        matches = _NUMBER_RE.findall(answer)
        if not matches:
            raise ValueParseError(f"no number in {answer!r}")
        year = next((m for m in matches if len(m) == 4 and "." not in m), None)
        value = float(year if year is not None else matches[0])
        return ComparableValue("numeric", answer, numeric=value)
    if expected == "boolean":
        norm = normalize_answer(answer)
        if norm not in ("yes", "no"):
            raise ValueParseError(f"{answer!r} is neither yes nor no")
        return ComparableValue("boolean", answer, boolean=(norm == "yes"))
    if expected == "text":
        return ComparableValue("text", answer, text=normalize_answer(answer))
    raise ValueParseError(f"unknown value kind {expected!r}")


def _require(op: DiscreteOp, *values: ComparableValue) -> None:
    for v in values:
        if v.kind != op.kind:
            raise TypeMismatch(
                f"{op.value} expects {op.kind} values, got {v.kind} from {v.source!r}")


def _longest_common_run(a: str, b: str) -> str:
    ta, tb = a.split(), b.split()
    best, best_len, best_pos = "", 0, len(ta)
    for i in range(len(ta)):
        for j in range(len(tb)):
            k = 0
            while i + k < len(ta) and j + k < len(tb) and ta[i + k] == tb[j + k]:
                k += 1
            if k > best_len or (k == best_len and k > 0 and i < best_pos):
                best, best_len, best_pos = " ".join(ta[i:i + k]), k, i
    return best


def apply(op: DiscreteOp, ent1: str, v1: ComparableValue,
          ent2: str, v2: ComparableValue) -> str:
    """Evaluate a discrete operation over the two per-entity answers."""
    _require(op, v1, v2)
    if op is DiscreteOp.IS_GREATER or op is DiscreteOp.IS_SMALLER:
        if v1.numeric == v2.numeric:
            raise AmbiguousComparison(f"numeric tie at {v1.numeric}")
        flag = v1.numeric > v2.numeric if op is DiscreteOp.IS_GREATER else v1.numeric < v2.numeric
        return "yes" if flag else "no"
    if op is DiscreteOp.WHICH_IS_GREATER or op is DiscreteOp.WHICH_IS_SMALLER:
        if v1.numeric == v2.numeric:
            raise AmbiguousComparison(f"numeric tie at {v1.numeric}")
        first = v1.numeric > v2.numeric if op is DiscreteOp.WHICH_IS_GREATER else v1.numeric < v2.numeric
        return ent1 if first else ent2
    if op is DiscreteOp.AND:
        return "yes" if (v1.boolean and v2.boolean) else "no"
    if op is DiscreteOp.OR:
        return "yes" if (v1.boolean or v2.boolean) else "no"
    if op is DiscreteOp.WHICH_IS_TRUE:
        if v1.boolean == v2.boolean:
            raise AmbiguousComparison("both sub-answers agree; no single true entity")
        return ent1 if v1.boolean else ent2
    if op is DiscreteOp.IS_EQUAL:
        return "yes" if v1.text == v2.text else "no"
    if op is DiscreteOp.NOT_EQUAL:
        return "no" if v1.text == v2.text else "yes"
    if op is DiscreteOp.INTERSECTION:
        return _longest_common_run(v1.text, v2.text)
    raise TypeMismatch(f"unknown operation {op!r}")


_DUALS = {
    DiscreteOp.IS_GREATER: DiscreteOp.IS_SMALLER,
    DiscreteOp.IS_SMALLER: DiscreteOp.IS_GREATER,
    DiscreteOp.WHICH_IS_GREATER: DiscreteOp.WHICH_IS_SMALLER,
    DiscreteOp.WHICH_IS_SMALLER: DiscreteOp.WHICH_IS_GREATER,
    DiscreteOp.IS_EQUAL: DiscreteOp.NOT_EQUAL,
    DiscreteOp.NOT_EQUAL: DiscreteOp.IS_EQUAL,
    DiscreteOp.WHICH_IS_TRUE: DiscreteOp.WHICH_IS_TRUE,
}


def dual(op: DiscreteOp) -> Optional[DiscreteOp]:
    """The operation a keyword-inverted question evaluates; None for the
    three non-invertible operations (And, Or, Intersection)."""
    return _DUALS.get(op)
