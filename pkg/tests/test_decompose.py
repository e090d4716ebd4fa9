import pytest

from qdecomp.core import ReasoningType, tokenize
from qdecomp.decompose import (decompose_all, find_op, generate_bridging,
                               generate_comparison, generate_intersection,
                               generate_original, parse_comparison,
                               propose_comparison_spans)
from qdecomp.discrete_ops import DiscreteOp
from qdecomp.errors import (NotComparison, RewriteError, SpanError,
                            UnsupportedComparison)
from qdecomp.pointer import FEATURE_ENCODER


def subqs(d):
    return [sq.render() for sq in d.sub_questions]


# --- bridging -------------------------------------------------------------

def test_bridging_article_becomes_which():
    q = tokenize("Which team does the player named 2015 Diamond Head "
                 "Classic's MVP play for?")
    d = generate_bridging(q, 3, 4, 11)
    assert subqs(d) == ["Which player named 2015 Diamond Head Classic's MVP?",
                       "Which team does ANS play for?"]
    assert d.reasoning_type is ReasoningType.BRIDGING
    assert d.sub_questions[1].has_placeholder


def test_bridging_trailing_clause():
    q = tokenize("Robert Smith founded the multinational company "
                 "headquartered in what city?")
    d = generate_bridging(q, 0, 5, 6)
    assert subqs(d) == ["Robert Smith founded which multinational company?",
                       "ANS headquartered in what city?"]


def test_bridging_inserts_which_when_no_article():
    q = tokenize("Alice met Bob Smith yesterday in what city?")
    d = generate_bridging(q, 2, 2, 4)
    assert subqs(d)[0].startswith("Which ")


def test_bridging_rejects_bad_spans():
    q = tokenize("Alice met Bob?")
    with pytest.raises(SpanError):
        generate_bridging(q, 3, 1, 2)


# --- intersection ---------------------------------------------------------

def test_intersection_wh_medial_split():
    q = tokenize("Stories USA starred which actor and comedian from "
                 "'The Office'?")
    d = generate_intersection(q, 3, 7)
    assert subqs(d) == ["Stories USA starred which actor and comedian?",
                       "Which actor and comedian from 'The Office'?"]
    assert not any(sq.has_placeholder for sq in d.sub_questions)


def test_intersection_wh_initial_keeps_prefix():
    q = tokenize("Which actor starred in Stories USA and was born in 1962?")
    d = generate_intersection(q, 5, 6)
    first, second = subqs(d)
    assert first.startswith("Which actor starred in Stories USA")
    assert second.startswith("Which actor")


# --- comparison parse and find_op ------------------------------------------

FIXTURES = [
    ("Who was born earlier, Emma Bull or Virginia Woolf?",
     DiscreteOp.WHICH_IS_SMALLER,
     ["Emma Bull was born when?", "Virginia Woolf was born when?"]),
    ("Did the Battle of Stones River occur before the Battle of Saipan?",
     DiscreteOp.IS_SMALLER,
     ["The Battle of Stones River occur when?",
      "The Battle of Saipan occur when?"]),
    ("In between Atsushi Ogata and Ralpha Smart who graduated from "
     "Harvard College?",
     DiscreteOp.WHICH_IS_TRUE,
     ["Atsushi Ogata graduated from Harvard College?",
      "Ralpha Smart graduated from Harvard College?"]),
    ("Are Hot Rod and The Memory of Our People both magazines?",
     DiscreteOp.AND,
     ["Is Hot Rod magazines?", "Is The Memory of Our People magazines?"]),
    ("Are Cardinal Health and Kansas City Southern located in the "
     "same state?",
     DiscreteOp.IS_EQUAL,
     ["Cardinal Health located in which state?",
      "Kansas City Southern located in which state?"]),
    ("Which restaurant was founded first, Papa Murphy's or Gino's Pizza "
     "and Spaghetti?",
     DiscreteOp.WHICH_IS_SMALLER,
     ["Papa Murphy's was founded when?",
      "Gino's Pizza and Spaghetti was founded when?"]),
    ("Which filmmaker, Stan Brakhage or Alfred L. Werker, was a "
     "non-narrative filmmaker?",
     DiscreteOp.WHICH_IS_TRUE,
     ["Stan Brakhage was a non-narrative filmmaker?",
      "Alfred L. Werker was a non-narrative filmmaker?"]),
    ("Which pizza chain has locations in more cities, Round Table Pizza "
     "or Marion's Piazza?",
     DiscreteOp.WHICH_IS_GREATER,
     ["Round Table Pizza has locations in how many cities?",
      "Marion's Piazza has locations in how many cities?"]),
]


@pytest.mark.parametrize("raw,op,expected",
                         FIXTURES, ids=[f[0][:30] for f in FIXTURES])
def test_comparison_fixture(raw, op, expected):
    q = tokenize(raw)
    spans = propose_comparison_spans(q)
    d = generate_comparison(q, *spans)
    assert d.op is op
    assert subqs(d) == expected


def test_parse_comparison_fields():
    q = tokenize("Which filmmaker, Stan Brakhage or Alfred L. Werker, was "
                 "a non-narrative filmmaker?")
    spans = propose_comparison_spans(q)
    parse = parse_comparison(q, *spans)
    assert parse.head_entity == (0, 2)  # "Which filmmaker"
    assert parse.coordination is not None
    assert q.tokens[parse.coordination].text == "or"
    assert not parse.is_yes_no


def test_parse_comparison_preconjunct_both():
    q = tokenize("Are Hot Rod and The Memory of Our People both magazines?")
    parse = parse_comparison(q, *propose_comparison_spans(q))
    assert parse.preconjunct is not None
    assert q.tokens[parse.preconjunct].text == "both"
    assert parse.is_yes_no


def test_non_comparison_raises():
    q = tokenize("what is the capital of france?")
    with pytest.raises(NotComparison):
        propose_comparison_spans(q)


def test_yes_no_either_or_maps_to_or():
    q = tokenize("Is either Foo Fighters or Nirvana a grunge band?")
    parse = parse_comparison(q, *propose_comparison_spans(q))
    assert find_op(parse, q) is DiscreteOp.OR


def test_bare_and_question_is_conjunction():
    q = tokenize("Did Alpha Beta and Gamma Delta win?")
    parse = parse_comparison(q, *propose_comparison_spans(q))
    assert find_op(parse, q) is DiscreteOp.AND


def test_unsupported_comparison():
    # not yes/no, no wh-word, no keyword: no decision-tree branch applies
    q = tokenize("Name the city between Paris or London.")
    parse = parse_comparison(q, *propose_comparison_spans(q))
    with pytest.raises(UnsupportedComparison):
        find_op(parse, q)


def test_numeric_rewrite_error_when_no_pattern():
    q = tokenize("Which is taller, Eiffel Tower or Chrysler Building?")
    with pytest.raises(RewriteError):
        generate_comparison(q, *propose_comparison_spans(q))


# --- original and decompose_all --------------------------------------------

def test_generate_original_is_identity():
    q = tokenize("Who wrote War and Peace?")
    d = generate_original(q)
    assert subqs(d) == ["Who wrote War and Peace?"]


def test_decompose_all_always_includes_original():
    q = tokenize("Who was born earlier, Emma Bull or Virginia Woolf?")
    notes = {}
    candidates = decompose_all(q, {}, FEATURE_ENCODER, notes)
    types = [d.reasoning_type for d in candidates]
    assert types[-1] is ReasoningType.ORIGINAL
    assert ReasoningType.COMPARISON in types  # span proposer bootstrap
    assert "bridging" in notes and "intersection" in notes


def test_decompose_all_records_comparison_failure():
    q = tokenize("what is the capital of france?")
    notes = {}
    candidates = decompose_all(q, {}, FEATURE_ENCODER, notes)
    assert [d.reasoning_type for d in candidates] == [ReasoningType.ORIGINAL]
    assert "comparison" in notes
