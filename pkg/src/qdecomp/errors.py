"""Exception hierarchy shared by all qdecomp modules."""


class QDecompError(Exception):
    """Base class for all library errors."""


class EmptyQuestion(QDecompError):
    """Raised when a question is empty after trimming."""


class ParseError(QDecompError):
    """Malformed input file or record; carries the offending id when known."""

    def __init__(self, message, record_id=None):
        super().__init__(message)
        self.record_id = record_id


class ShapeError(QDecompError):
    """Dimension mismatch between an embedding, head, or score matrix."""


class ArityError(QDecompError):
    """Annotation index count does not match the reasoning type, or no data."""


class SpanError(QDecompError):
    """Span indices violate ordering or bounds."""


class NotComparison(QDecompError):
    """The question cannot be parsed as a two-entity comparison."""


class UnsupportedComparison(QDecompError):
    """No discrete-operation branch applies to the parsed comparison."""


class RewriteError(QDecompError):
    """A sub-question rewrite rule could not be applied."""

    def __init__(self, message, pattern=None):
        super().__init__(message)
        self.pattern = pattern


class ValueParseError(QDecompError):
    """An answer string could not be coerced to the expected value kind."""


class TypeMismatch(QDecompError):
    """Value kinds do not match the discrete operation's type row."""


class AmbiguousComparison(QDecompError):
    """A discrete comparison has no well-defined winner (tie or double yes/no)."""


class MissingEmbedding(QDecompError):
    """No stored embedding for the requested question id."""


class MissingScores(QDecompError):
    """No stored RC scores for the requested (sub-question, paragraph) key."""


class NoContext(QDecompError):
    """A reading-comprehension call received zero paragraphs."""


class NoAnswer(QDecompError):
    """Every candidate decomposition failed; nothing to arbitrate."""


class EmptyCorpus(QDecompError):
    """A retrieval index cannot be built from zero documents."""


class InsufficientDistractors(QDecompError):
    """Fewer eligible distractor paragraphs than requested."""


class InversionError(QDecompError):
    """An invertible comparison question carries no invertible keyword."""


class DegenerateTraining(UserWarning):
    """Scorer training data contains a single label class."""
