"""Acceptance criteria for the decomposition pipeline.

Each test exercises one criterion end to end with an independently coded
oracle where one applies, enforces the stated tolerance and time budget, and
prints a single PASS/FAIL line directly to the terminal.
"""

import time
from itertools import combinations_with_replacement

import numpy as np
import pytest

from qdecomp.core import Paragraph, tokenize
from qdecomp.decompose import (decompose_all, find_op, generate_bridging,
                               generate_comparison, generate_intersection,
                               parse_comparison, propose_comparison_spans)
from qdecomp.discrete_ops import DiscreteOp, dual
from qdecomp.metrics import (evaluate, invert_comparison, joint_f1, token_f1)
from qdecomp.pointer import (FEATURE_ENCODER, SpanAnnotation, TrainConfig,
                             decode, predict_indices, train)
from qdecomp._kernels import pointer_epoch
from qdecomp.orchestrate import (ScorerModel, arbitrate, oracle_select,
                                 run_comparison, run_decomposition, score_all,
                                 scorer_gradient, scorer_loss)
from qdecomp.rc import (ParagraphScores, augment_question, best_span,
                        oracle_backend, select_answer)
from qdecomp.retrieval import build_index, feature_ids, regenerate_distractors
from qdecomp.core import example_from_record


@pytest.fixture
def announce(request, capfd):
    """Print one [PASS]/[FAIL] line per criterion on the real terminal."""
    outcome = {"ok": False}

    def _mark(label):
        outcome["label"] = label
        outcome["ok"] = True

    yield _mark
    with capfd.disabled():
        state = "PASS" if outcome["ok"] else "FAIL"
        label = outcome.get("label", request.node.name)
        print(f"[{state}] {label}")


def timed():
    return time.perf_counter()


# --- 1. rewrite fidelity on the printed fixtures ----------------------------

REWRITE_FIXTURES = [
    # (kind, question, args, expected sub-questions)
    ("bridging",
     "Which team does the player named 2015 Diamond Head Classic's MVP "
     "play for?", (3, 4, 11),
     ["Which player named 2015 Diamond Head Classic's MVP?",
      "Which team does ANS play for?"]),
    ("bridging",
     "Robert Smith founded the multinational company headquartered in "
     "what city?", (0, 5, 6),
     ["Robert Smith founded which multinational company?",
      "ANS headquartered in what city?"]),
    ("intersection",
     "Stories USA starred which actor and comedian from 'The Office'?",
     (3, 7),
     ["Stories USA starred which actor and comedian?",
      "Which actor and comedian from 'The Office'?"]),
    ("comparison",
     "Who was born earlier, Emma Bull or Virginia Woolf?", None,
     ["Emma Bull was born when?", "Virginia Woolf was born when?"]),
    ("comparison",
     "Did the Battle of Stones River occur before the Battle of Saipan?",
     None,
     ["The Battle of Stones River occur when?",
      "The Battle of Saipan occur when?"]),
    ("comparison",
     "In between Atsushi Ogata and Ralpha Smart who graduated from "
     "Harvard College?", None,
     ["Atsushi Ogata graduated from Harvard College?",
      "Ralpha Smart graduated from Harvard College?"]),
]


def _norm(text):
    return text.rstrip("?").lower()


def test_rewrite_fidelity(announce):
    t0 = timed()
    for kind, raw, args, expected in REWRITE_FIXTURES:
        q = tokenize(raw)
        if kind == "bridging":
            d = generate_bridging(q, *args)
        elif kind == "intersection":
            d = generate_intersection(q, *args)
        else:
            d = generate_comparison(q, *propose_comparison_spans(q))
        got = [sq.render() for sq in d.sub_questions]
        assert list(map(_norm, got)) == list(map(_norm, expected)), raw
    assert timed() - t0 < 1.0
    announce("rewrite fidelity: 6 printed fixtures exact")


# --- 2. discrete-op calculus end to end -------------------------------------

WORKED_PARAS = [
    Paragraph("SR", ("The Battle of Stones River began in 1862.",)),
    Paragraph("SA", ("The Battle of Saipan was fought in 1944.",)),
    Paragraph("AO", ("Atsushi Ogata graduated from Harvard College.",)),
    Paragraph("CH", ("Cardinal Health is headquartered in Ohio.",)),
    Paragraph("KC", ("Kansas City Southern is based in Missouri.",)),
]

WORKED_BACKEND = oracle_backend({
    "The Battle of Stones River occur when?": "1862",
    "The Battle of Saipan occur when?": "1944",
    "Atsushi Ogata graduated from Harvard College?": "yes",
    "Ralpha Smart graduated from Harvard College?": "no",
    "Cardinal Health located in which state?": "Ohio",
    "Kansas City Southern located in which state?": "Missouri",
})

WORKED_EXAMPLES = [
    ("Did the Battle of Stones River occur before the Battle of Saipan?",
     "yes"),
    ("In between Atsushi Ogata and Ralpha Smart who graduated from "
     "Harvard College?", "Atsushi Ogata"),
    ("Are Cardinal Health and Kansas City Southern located in the "
     "same state?", "no"),
]


def test_discrete_op_calculus(announce):
    t0 = timed()
    for raw, expected in WORKED_EXAMPLES:
        q = tokenize(raw)
        d = generate_comparison(q, *propose_comparison_spans(q))
        result = run_comparison(d, WORKED_PARAS, WORKED_BACKEND)
        assert not result.failed
        assert result.final_answer == expected, raw
    assert timed() - t0 < 1.0
    announce("discrete-op calculus: 3 worked examples (yes / "
             "Atsushi Ogata / no)")


# --- 3. decode-oracle equivalence -------------------------------------------

def enum_decode(Y):
    n, c = Y.shape
    best_tup, best_val = None, -1.0
    for tup in combinations_with_replacement(range(n), c):
        v = 1.0
        for j, i in enumerate(tup):
            v = v * Y[i, j]
        if v > best_val:
            best_val, best_tup = v, tup
    return best_tup


def random_score_matrix(rng, n, c):
    Z = rng.normal(size=(n, c))
    Y = np.exp(Z - Z.max(axis=0, keepdims=True))
    return Y / Y.sum(axis=0, keepdims=True)


def test_decode_oracle_equivalence(announce):
    rng = np.random.default_rng(42)
    t0 = timed()
    for _ in range(1000):
        n = int(rng.integers(1, 13))
        c = int(rng.integers(2, 5))
        Y = random_score_matrix(rng, n, c)
        assert decode(Y) == enum_decode(Y)
    elapsed = timed() - t0
    assert elapsed < 10.0
    announce(f"decode-oracle equivalence: 1000/1000 matrices "
             f"({elapsed:.1f}s)")


# --- 4. pointer training on a separable corpus ------------------------------

MARKERS = ("aardvark", "bassoon", "cathedral")
FILLERS = ("mild", "green", "stone", "river", "plate", "cloud", "drift",
           "ember", "quartz", "willow")


def marker_corpus(rng, n_examples, c=3):
    data = []
    for k in range(n_examples):
        n = int(rng.integers(8, 14))
        words = [str(rng.choice(FILLERS)) for _ in range(n)]
        positions = sorted(rng.choice(n, size=c, replace=False).tolist())
        for j, pos in enumerate(positions):
            words[pos] = MARKERS[j]
        q = tokenize(" ".join(words), qid=f"a{k}")
        data.append((q, SpanAnnotation(f"a{k}", None, tuple(positions))))
    return data


def test_pointer_training_recovery(announce):
    rng = np.random.default_rng(5)
    train_set = marker_corpus(rng, 200)
    held_out = marker_corpus(rng, 100)
    t0 = timed()
    head = train(train_set, FEATURE_ENCODER, 3,
                 TrainConfig(learning_rate=0.5, epochs=300, seed=0))
    hits = sum(predict_indices(head, FEATURE_ENCODER, q) == ann.indices
               for q, ann in held_out)
    elapsed = timed() - t0
    assert hits / len(held_out) >= 0.95
    assert elapsed < 60.0
    announce(f"pointer training: {hits}/100 held-out index tuples "
             f"recovered ({elapsed:.1f}s)")


# --- 5. gradient checks ------------------------------------------------------

def central_fd(loss_fn, W, eps=1e-6):
    G = np.zeros_like(W)
    it = np.nditer(W, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        Wp, Wm = W.copy(), W.copy()
        Wp[idx] += eps
        Wm[idx] -= eps
        G[idx] = (loss_fn(Wp) - loss_fn(Wm)) / (2 * eps)
    return G


def test_gradient_checks(announce):
    rng = np.random.default_rng(17)
    t0 = timed()
    for _ in range(20):
        # pointer epoch gradient
        n, h, c = (int(rng.integers(3, 7)), int(rng.integers(3, 6)),
                   int(rng.integers(2, 5)))
        U = rng.normal(size=(2 * n, h))
        offsets = np.array([0, n, 2 * n], dtype=np.int64)
        gold = rng.integers(0, n, size=(2, c)).astype(np.int64)
        W = rng.normal(size=(h, c))
        _, grad = pointer_epoch(U, offsets, gold, W)
        fd = central_fd(lambda M: pointer_epoch(U, offsets, gold, M)[0], W)
        assert np.abs(grad - fd).max() <= 1e-4 * max(1.0, np.abs(fd).max())

        # scorer gradient
        m, hh = int(rng.integers(3, 8)), int(rng.integers(3, 7))
        X = rng.normal(size=(m, hh))
        y = rng.integers(0, 2, size=m).astype(np.float64)
        w = rng.normal(size=hh)
        grad = scorer_gradient(X, y, w)
        fd = central_fd(lambda v: scorer_loss(X, y, v), w)
        assert np.abs(grad - fd).max() <= 1e-4 * max(1.0, np.abs(fd).max())
    elapsed = timed() - t0
    assert elapsed < 10.0
    announce(f"gradient checks: pointer and scorer match central finite "
             f"differences on 20 instances ({elapsed:.1f}s)")


# --- 6. RC selection ----------------------------------------------------------

def prob_vector(rng, n):
    p = rng.random(n) + 1e-9
    return p / p.sum()


def enum_span(p_start, p_end):
    best, best_v = (0, 0), -1.0
    for j in range(len(p_start)):
        for k in range(j, len(p_end)):
            if p_start[j] * p_end[k] > best_v:
                best_v, best = p_start[j] * p_end[k], (j, k)
    return best


def test_rc_selection(announce):
    rng = np.random.default_rng(9)
    t0 = timed()
    for _ in range(200):
        n = int(rng.integers(1, 51))
        ps, pe = prob_vector(rng, n), prob_vector(rng, n)
        assert best_span(ps, pe) == enum_span(ps, pe)
    # lowest-y_none paragraph wins regardless of presentation order
    paras = [Paragraph(f"P{i}", (f"token{i} alpha beta gamma delta.",))
             for i in range(4)]
    n_tok = len(tokenize(paras[0].text).tokens)
    uniform = np.full(n_tok, 1.0 / n_tok)
    y_nones = [0.7, 0.2, 0.9, 0.5]
    scores = [ParagraphScores(1.0, 0.0, 0.0, y, uniform, uniform,
                              paragraph_index=i)
              for i, y in enumerate(y_nones)]
    for perm in ([0, 1, 2, 3], [3, 2, 1, 0], [2, 0, 3, 1]):
        cand = select_answer([scores[i] for i in perm],
                             [paras[i] for i in perm])
        assert cand.paragraph_index == 1
    elapsed = timed() - t0
    assert elapsed < 5.0
    announce(f"rc selection: 200/200 span argmaxes match enumeration; "
             f"lowest-no-answer paragraph chosen under permutation "
             f"({elapsed:.1f}s)")


# --- 7. inversion involution ---------------------------------------------------

NAME_PAIRS = [
    ("Emma Bull", "Virginia Woolf"), ("Alice Monroe", "Brian Keller"),
    ("Clara Hughes", "David Lang"), ("Erin Walsh", "Frank Moore"),
    ("Grace Lin", "Henry Ford"), ("Iris Chang", "James Dean"),
    ("Karen Hill", "Liam Burke"), ("Mona Ruiz", "Noel Byrne"),
]

PLACE_PAIRS = [
    ("Alpha Creek", "Beta Ridge"), ("Cedar Falls", "Delta Plains"),
    ("Eagle Pass", "Fox Hollow"), ("Glen Cove", "Haven Port"),
    ("Iron Gulch", "Jade Valley"), ("Kent Shore", "Lark Mesa"),
    ("Mill Bend", "North Bluff"), ("Oak Grove", "Pine Flats"),
]

TEMPLATES = [
    (DiscreteOp.WHICH_IS_SMALLER, NAME_PAIRS,
     "Who was born earlier, {a} or {b}?"),
    (DiscreteOp.WHICH_IS_GREATER, NAME_PAIRS,
     "Who was born later, {a} or {b}?"),
    (DiscreteOp.IS_SMALLER, PLACE_PAIRS,
     "Did the Battle of {a} occur before the Battle of {b}?"),
    (DiscreteOp.IS_GREATER, PLACE_PAIRS,
     "Did the Battle of {a} occur after the Battle of {b}?"),
    (DiscreteOp.IS_EQUAL, NAME_PAIRS,
     "Are {a} and {b} located in the same state?"),
    (DiscreteOp.NOT_EQUAL, NAME_PAIRS,
     "Are {a} and {b} located in the different state?"),
    (DiscreteOp.WHICH_IS_TRUE, NAME_PAIRS,
     "Which filmmaker, {a} or {b}, was a documentary filmmaker?"),
]


def inversion_fixture():
    """50 questions spanning the seven invertible op families."""
    out = []
    for i, (op, pairs, tmpl) in enumerate(TEMPLATES):
        take = 8 if i == 0 else 7
        for a, b in pairs[:take]:
            out.append((op, tmpl.format(a=a, b=b)))
    return out[:50]


def test_inversion_involution(announce):
    fixture = inversion_fixture()
    assert len(fixture) == 50
    assert len({op for op, _ in fixture}) == 7
    t0 = timed()
    for expected_op, raw in fixture:
        q = tokenize(raw)
        parse = parse_comparison(q, *propose_comparison_spans(q))
        op = find_op(parse, q)
        assert op is expected_op, raw
        inv_q, inv_op = invert_comparison(q, parse, op)
        # find_op on the inverted question yields the dual operation
        inv_parse = parse_comparison(inv_q, *propose_comparison_spans(inv_q))
        assert find_op(inv_parse, inv_q) is dual(op), raw
        # inverting again renders the original string
        back_q, back_op = invert_comparison(inv_q, inv_parse, inv_op)
        assert back_q.raw == q.raw, raw
        assert back_op is op
    assert timed() - t0 < 1.0

    rng = np.random.default_rng(23)
    for _ in range(200):
        a, b = rng.random(), rng.random()
        assert joint_f1(a, b) == min(a, b)
    announce("inversion involution: 50/50 round trips across 7 op "
             "families; joint F1 = example-wise min")


# --- 8. metric fidelity ---------------------------------------------------------

F1_FIXTURES = [
    ("the quick fox", "the quick fox", 1.0),
    ("quick fox", "the quick fox", 1.0),  # articles are normalized away
    ("brown fox", "quick brown fox", 0.8),  # p = 1, r = 2/3
    ("alpha beta", "beta gamma delta", 0.4),  # p = 1/2, r = 1/3
    ("nothing shared", "completely different words", 0.0),
]


def test_metric_fidelity(announce):
    assert token_f1("one two three", "two three four") == pytest.approx(
        0.667, abs=5e-4)
    for pred, gold, expected in F1_FIXTURES:
        assert token_f1(pred, gold) == pytest.approx(expected)
    records = [
        {"_id": f"m{i}", "question": "q?", "answer": ans,
         "type": "bridge", "level": "easy", "supporting_facts": [],
         "context": []}
        for i, ans in enumerate(["alpha beta", "gamma", "delta"])
    ]
    gold = [example_from_record(r) for r in records]
    preds = {"m0": "alpha beta", "m1": "wrong", "m2": "delta"}
    report = evaluate(preds, gold)
    per_example = [token_f1(preds[g.id], g.gold_answer) for g in gold]
    assert report.overall_f1 == pytest.approx(float(np.mean(per_example)))
    announce("metric fidelity: token F1 matches 5 hand-computed fixtures; "
             "evaluate aggregates the per-example mean")


# --- 9. retrieval oracle ---------------------------------------------------------

def toy_corpus(n=10):
    topics = ["emma bull wrote fantasy novels",
              "virginia woolf wrote modernist novels",
              "the sacramento kings play basketball",
              "buddy hield plays for the kings",
              "the eiffel tower is in paris",
              "paris is the capital of france",
              "hot rod is a car magazine",
              "cardinal health is based in ohio",
              "kansas city southern is a railroad",
              "stones river was a civil war battle"]
    return [Paragraph(f"D{i}", (topics[i % len(topics)] + f" variant {i}.",))
            for i in range(n)]


def dense_ranking(paragraphs, query, k):
    vocab, rows = {}, []
    for p in paragraphs:
        counts = {}
        for fid in feature_ids(p.text):
            counts[fid] = counts.get(fid, 0) + 1
        rows.append(counts)
        for fid in counts:
            vocab.setdefault(fid, len(vocab))
    n = len(paragraphs)
    df = np.zeros(len(vocab))
    for counts in rows:
        for fid in counts:
            df[vocab[fid]] += 1
    idf = np.log((1 + n) / (1 + df)) + 1.0
    M = np.zeros((n, len(vocab)))
    for i, counts in enumerate(rows):
        for fid, c in counts.items():
            M[i, vocab[fid]] = (1 + np.log(c)) * idf[vocab[fid]]
    norms = np.linalg.norm(M, axis=1)
    M = M / np.where(norms > 0, norms, 1)[:, None]
    qcounts = {}
    for fid in feature_ids(query):
        qcounts[fid] = qcounts.get(fid, 0) + 1
    default_idf = np.log(1 + n) + 1.0
    qv, extra = np.zeros(len(vocab)), 0.0
    for fid, c in qcounts.items():
        w = (1 + np.log(c)) * (idf[vocab[fid]] if fid in vocab
                               else default_idf)
        if fid in vocab:
            qv[vocab[fid]] = w
        else:
            extra += w * w
    qnorm = np.sqrt(qv @ qv + extra)
    if qnorm > 0:
        qv = qv / qnorm
    scores = M @ qv
    return sorted(range(n), key=lambda i: (-scores[i], i))[:k]


def test_retrieval_oracle(announce):
    t0 = timed()
    paras = toy_corpus(10)
    index = build_index(paras)
    queries = ["who wrote fantasy novels?",
               "where do the kings play basketball",
               "civil war battle of stones river"]
    for query in queries:
        got = [i for i, _ in index.query(query, 5)]
        assert got == dense_ranking(paras, query, 5), query

    ex = example_from_record({
        "_id": "e1",
        "question": "Who wrote fantasy novels, Emma Bull or Virginia Woolf?",
        "answer": "Emma Bull", "type": "comparison", "level": "medium",
        "supporting_facts": [["G1", 0], ["G2", 0]],
        "context": [["G1", ["Emma Bull wrote fantasy novels."]],
                    ["G2", ["Virginia Woolf wrote modernist novels."]],
                    ["Old1", ["Stale distractor one."]],
                    ["Old2", ["Stale distractor two."]]],
    })
    big = (toy_corpus(10)
           + [Paragraph(f"X{i}", (f"Filler text number {i} about writers.",))
              for i in range(18)]
           + [Paragraph(f"P{i}", (f"Emma Bull appears in paragraph {i}.",))
              for i in range(2)])
    out = regenerate_distractors(ex, build_index(big), n_distractors=8)
    titles = {p.title for p in out.paragraphs}
    assert {"G1", "G2"} <= titles and not {"Old1", "Old2"} & titles
    for p in out.paragraphs:
        if p.title not in ("G1", "G2"):
            assert "emma bull" not in p.text.lower()
    assert timed() - t0 < 1.0
    announce("retrieval oracle: 3/3 top-5 rankings match dense cosine; "
             "distractor constraints hold on the 30-document fixture")


# --- 10. arbitration dominance ---------------------------------------------------

def test_arbitration_dominance(announce):
    rng = np.random.default_rng(31)
    model = ScorerModel(FEATURE_ENCODER,
                        rng.normal(size=FEATURE_ENCODER.h))
    oracle_f1s, scorer_f1s = [], []
    for raw, gold in WORKED_EXAMPLES:
        q = tokenize(raw)
        candidates = decompose_all(q, {}, FEATURE_ENCODER, {})
        results = [run_decomposition(d, WORKED_PARAS, WORKED_BACKEND)
                   for d in candidates]
        scored = score_all(model, q, results, WORKED_PARAS)
        scorer_pick = arbitrate(scored, "scorer")
        oracle_pick = oracle_select(scored, gold)
        oracle_f1s.append(token_f1(oracle_pick.final_answer, gold))
        scorer_f1s.append(token_f1(scorer_pick.final_answer, gold))
        # argmax is invariant under positive rescaling of all scores
        for scale in (0.01, 3.0, 1000.0):
            rescaled = [r if r.arbiter_score is None else
                        r.__class__(**{**r.__dict__,
                                       "arbiter_score": r.arbiter_score * scale})
                        for r in scored]
            assert (arbitrate(rescaled, "scorer").reasoning_type
                    is scorer_pick.reasoning_type)
    oracle_f1, scorer_f1 = np.mean(oracle_f1s), np.mean(scorer_f1s)
    assert oracle_f1 >= scorer_f1 >= 0.0
    announce(f"arbitration dominance: oracle F1 {oracle_f1:.3f} >= scorer "
             f"F1 {scorer_f1:.3f} >= 0; argmax invariant under rescaling")


# --- 11. augmentation statistics --------------------------------------------------

def test_augmentation_statistics(announce):
    tokens = tokenize(" ".join(FILLERS[i % len(FILLERS)]
                               for i in range(10000))).tokens
    kept = len(augment_question(tokens, rng_seed=13))
    rate = 1.0 - kept / len(tokens)
    assert abs(rate - 0.05) <= 0.01
    announce(f"augmentation statistics: observed drop rate {rate:.4f} "
             f"within 0.05 +/- 0.01 on 10,000 seeded tokens")
