"""Multi-hop question decomposition: span-pointer decomposition into
single-hop sub-questions, rule-based rewriting, discrete comparison
operations, pluggable reading-comprehension backends, TF-IDF retrieval and an
evaluation/robustness harness."""

from .core import (Decomposition, Paragraph, QAExample, ReasoningType,
                   SubQuestion, Token, TokenizedQuestion, detokenize,
                   load_dataset, normalize_answer, render_question,
                   save_dataset, tokenize)
from .decompose import (decompose_all, find_op, generate_bridging,
                        generate_comparison, generate_intersection,
                        generate_original, parse_comparison,
                        propose_comparison_spans)
from .discrete_ops import ComparableValue, DiscreteOp, apply, dual, parse_value
from .errors import QDecompError
from .metrics import (EvalReport, evaluate, exact_match, invert_comparison,
                      joint_f1, token_f1)
from .orchestrate import (DecompositionResult, PipelineClassifier,
                          ScorerModel, arbitrate, oracle_select,
                          run_decomposition, score_all, score_decomposition,
                          train_scorer)
from .pointer import (EncoderBackend, FEATURE_ENCODER, PointerHead,
                      SpanAnnotation, TrainConfig, decode, predict_indices,
                      score, train)
from .rc import (AnswerCandidate, ParagraphScores, RCBackend,
                 augment_question, lexical_backend, oracle_backend,
                 replay_backend, select_answer)
from .retrieval import TfIdfIndex, build_index, regenerate_distractors

__version__ = "0.1.0"

__all__ = [
    "AnswerCandidate", "ComparableValue", "Decomposition",
    "DecompositionResult", "DiscreteOp", "EncoderBackend", "EvalReport",
    "FEATURE_ENCODER", "Paragraph", "ParagraphScores", "PipelineClassifier",
    "PointerHead", "QAExample", "QDecompError", "RCBackend", "ReasoningType",
    "ScorerModel", "SpanAnnotation", "SubQuestion", "TfIdfIndex", "Token",
    "TokenizedQuestion", "TrainConfig", "apply", "arbitrate",
    "augment_question", "build_index", "decode", "decompose_all",
    "detokenize", "dual", "evaluate", "exact_match", "find_op",
    "generate_bridging", "generate_comparison", "generate_intersection",
    "generate_original", "invert_comparison", "joint_f1", "lexical_backend",
    "load_dataset", "normalize_answer", "oracle_backend", "oracle_select",
    "parse_comparison", "parse_value", "predict_indices",
    "propose_comparison_spans", "regenerate_distractors", "render_question",
    "replay_backend", "run_decomposition", "save_dataset", "score",
    "score_all", "score_decomposition", "select_answer", "token_f1",
    "tokenize", "train", "train_scorer",
]
