"""Exception hierarchy shared across the package."""


class RelgraphError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(RelgraphError):
    """Malformed input file (CoNLL-U, graph JSONL, instance JSONL, vocab)."""


class GraphError(RelgraphError):
    """A word graph or subword graph violates its structural contract."""


class AlignmentError(RelgraphError):
    """Word graph and tokenized sequence disagree on the word inventory."""


class VocabError(RelgraphError):
    """Vocabulary lookup or vocabulary file problem."""


class ConfigError(RelgraphError):
    """Invalid or inconsistent configuration."""


class DimensionError(RelgraphError):
    """Shape-incompatible tensor operands."""


class NumericError(RelgraphError):
    """A numeric operation produced NaN or Inf."""


class ContractError(RelgraphError):
    """A documented precondition was violated by the caller."""


class SchemaError(RelgraphError):
    """Unknown relation label or inconsistent relation schema."""


class JoinError(RelgraphError):
    """Instance and graph files could not be joined one-to-one."""


class DegenerateGraphError(RelgraphError):
    """Graph randomization is impossible on this input."""


class TrainingAbort(RelgraphError):
    """Training stopped because the loss became non-finite."""
