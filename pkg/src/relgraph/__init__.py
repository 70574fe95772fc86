"""Structure-aware relation classification over graph meaning representations.

Pipeline: parse word-level graphs (CoNLL-U or graph JSONL), mark entity
spans and tokenize to subwords, lift the word graph onto the subword
sequence, encode with a small trainable sequence encoder plus a decoupled
graph encoder, and classify the relation from the two entity anchors.  The
harness adds a synthetic benchmark, multi-seed training, sweeps, and
bootstrap comparisons.
"""

from .data import (
    PreparedDataset,
    PreparedInstance,
    SynthSpec,
    gen_synthetic,
    group_split,
    load_dataset,
    load_pronoun_lexicon,
    load_splits,
    write_synthetic,
)
from .encoders import (
    Activation,
    EncoderConfig,
    GraphEncoderKind,
    Mixer,
    ModelParams,
    dagnn_plus,
    init_params,
    load_params,
    param_count,
    save_params,
    seq_encode,
    vanilla_gcn,
)
from .errors import RelgraphError
from .gmr import (
    Edge,
    Framework,
    ValidationReport,
    WordGraph,
    parse_conllu,
    parse_graph_json,
    to_conllu,
    to_graph_json,
    to_undirected_untyped,
    validate_graph,
)
from .graph import (
    Provenance,
    RandomPolicy,
    SubwordGraph,
    build_subword_graph,
    neighbors,
    randomize_graph,
)
from .model import (
    Prediction,
    RelationSchema,
    classify,
    extract_entity_reps,
    macro_f1,
    micro_f1,
)
from .stats import bootstrap_significance
from .tokenizer import (
    MarkedSequence,
    MarkedTokens,
    MarkerScheme,
    RcInstance,
    Vocab,
    insert_markers,
    load_vocab,
    tokenize,
)
from .training import (
    ExperimentReport,
    GraphSource,
    SweepAxis,
    TrainConfig,
    evaluate,
    run_sweep,
    train,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
