"""Dataset preparation and the synthetic clue-word benchmark.

The generator builds sentences whose relation label is carried by a single
clue word that sits on the tree path between the subject and the object but
far from both in surface order.  Off-path distractor words drawn from the
other relations' clue vocabularies make surface word identity insufficient,
so only a model that follows the graph can recover the label reliably; this
is the lever behind the structural-signal experiment.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import AlignmentError, ConfigError, JoinError
from .gmr import Edge, Framework, WordGraph, parse_graph_json, to_graph_json
from .graph import SubwordGraph, build_subword_graph
from .model import RelationSchema
from .tokenizer import (
    DEFAULT_MARKERS,
    DEFAULT_MAX_LEN,
    InstanceRejected,
    MarkedSequence,
    MarkerScheme,
    RcInstance,
    Vocab,
    insert_markers,
    instances_to_jsonl,
    load_vocab,
    parse_instances,
    tokenize,
    typed_markers,
)

log = logging.getLogger(__name__)

# distractor clue words attach at least this deep in the filler chain so
# they stay outside the propagation horizon of the entity markers
MIN_DISTRACTOR_DEPTH = 5


@dataclass(frozen=True)
class SynthSpec:
    """Size and shape knobs of the synthetic benchmark."""

    n_train: int = 2000
    n_test: int = 500
    n_relations: int = 5
    sentence_len: int = 24
    distance_min: int = 8
    filler_vocab: int = 360
    entity_vocab: int = 50
    clues_per_relation: int = 8
    n_distractors: int = 2

    def __post_init__(self) -> None:
        if self.n_relations < 2:
            raise ConfigError("need at least 2 relations")
        if self.sentence_len < self.distance_min + 4:
            raise ConfigError(
                f"sentence_len must be >= distance_min + 4 "
                f"({self.sentence_len} < {self.distance_min + 4})"
            )
        if min(self.n_train, self.n_test) < 1:
            raise ConfigError("need at least one train and one test instance")
        if min(self.filler_vocab, self.entity_vocab, self.clues_per_relation) < 1:
            raise ConfigError("vocabulary pools must be non-empty")

    @staticmethod
    def from_dict(obj: dict) -> "SynthSpec":
        known = set(SynthSpec.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown synthetic-spec keys: {sorted(unknown)}")
        return SynthSpec(**obj)


@dataclass
class WordPools:
    fillers: list[str]
    subjects: list[str]
    objects: list[str]
    clues: list[list[str]]  # one list per relation
    relations: list[str]

    def vocab_entries(self) -> list[str]:
        out = list(self.fillers) + list(self.subjects) + list(self.objects)
        for group in self.clues:
            out.extend(group)
        return out


def make_pools(spec: SynthSpec) -> WordPools:
    return WordPools(
        fillers=[f"fill{i:03d}" for i in range(spec.filler_vocab)],
        subjects=[f"subj{i:03d}" for i in range(spec.entity_vocab)],
        objects=[f"obj{i:03d}" for i in range(spec.entity_vocab)],
        clues=[
            [f"rel{r}clue{j:02d}" for j in range(spec.clues_per_relation)]
            for r in range(spec.n_relations)
        ],
        relations=[f"rel{r}" for r in range(spec.n_relations)],
    )


def _sample_positions(spec: SynthSpec, rng: random.Random) -> tuple[int, int, int]:
    """Pick (subj, obj, clue) positions with the clue far from both entities."""
    n, dmin = spec.sentence_len, spec.distance_min
    feasible_clues = [
        c for c in range(n) if sum(1 for p in range(n) if abs(p - c) >= dmin) >= 2
    ]
    if not feasible_clues:
        raise ConfigError(
            f"no clue position admits two entity slots at distance "
            f">= {dmin} in {n} tokens"
        )
    clue = feasible_clues[rng.randrange(len(feasible_clues))]
    far = [p for p in range(n) if abs(p - clue) >= dmin]
    subj, obj = rng.sample(far, 2)
    return subj, obj, clue


def _make_sentence(
    spec: SynthSpec, pools: WordPools, rng: random.Random, instance_id: str
) -> tuple[RcInstance, WordGraph]:
    subj_pos, obj_pos, clue_pos = _sample_positions(spec, rng)
    relation = rng.randrange(spec.n_relations)
    clue_word = pools.clues[relation][rng.randrange(len(pools.clues[relation]))]

    backbone = sorted(set(range(spec.sentence_len)) - {subj_pos, obj_pos, clue_pos})

    # distractors: clue words of other relations, attached deep in the chain
    # and preferably carrying the same far-from-entities surface signature
    min_depth = min(MIN_DISTRACTOR_DEPTH, max(0, len(backbone) - spec.n_distractors))
    deep = list(range(min_depth, len(backbone)))
    preferred = [
        k
        for k in deep
        if abs(backbone[k] - subj_pos) >= spec.distance_min
        and abs(backbone[k] - obj_pos) >= spec.distance_min
    ]
    candidates = preferred if len(preferred) >= spec.n_distractors else deep
    n_distract = min(spec.n_distractors, len(candidates))
    distractor_slots = sorted(rng.sample(candidates, n_distract))

    words = [""] * spec.sentence_len
    words[clue_pos] = clue_word
    words[subj_pos] = pools.subjects[rng.randrange(len(pools.subjects))]
    words[obj_pos] = pools.objects[rng.randrange(len(pools.objects))]
    distractor_positions = {backbone[k] for k in distractor_slots}
    for pos in backbone:
        if pos in distractor_positions:
            other = rng.randrange(spec.n_relations - 1)
            if other >= relation:
                other += 1
            words[pos] = pools.clues[other][rng.randrange(len(pools.clues[other]))]
        else:
            words[pos] = pools.fillers[rng.randrange(len(pools.fillers))]

    # tree rooted at the clue: both entities attach directly to it, so the
    # clue sits on the subject-object path; fillers hang off in one chain
    edges = [
        Edge(clue_pos, subj_pos, "nsubj"),
        Edge(clue_pos, obj_pos, "obj"),
    ]
    prev = clue_pos
    for pos in backbone:
        edges.append(Edge(prev, pos, "dep"))
        prev = pos
    graph = WordGraph(tuple(words), tuple(edges), Framework.UD)

    inst = RcInstance(
        instance_id=instance_id,
        tokens=tuple(words),
        subj_span=(subj_pos, subj_pos + 1),
        obj_span=(obj_pos, obj_pos + 1),
        relation=pools.relations[relation],
    )
    return inst, graph


@dataclass
class SyntheticDataset:
    train_instances: list[RcInstance]
    train_graphs: list[WordGraph]
    test_instances: list[RcInstance]
    test_graphs: list[WordGraph]
    vocab_entries: list[str]


def gen_synthetic(spec: SynthSpec, seed: int) -> SyntheticDataset:
    """Deterministically generate the benchmark for a seed."""
    pools = make_pools(spec)
    rng = random.Random(seed)
    train, train_g, test, test_g = [], [], [], []
    for i in range(spec.n_train):
        inst, g = _make_sentence(spec, pools, rng, f"train-{i:05d}")
        train.append(inst)
        train_g.append(g)
    for i in range(spec.n_test):
        inst, g = _make_sentence(spec, pools, rng, f"test-{i:05d}")
        test.append(inst)
        test_g.append(g)
    return SyntheticDataset(train, train_g, test, test_g, pools.vocab_entries())


def write_synthetic(dataset: SyntheticDataset, out_dir: str | Path) -> dict[str, Path]:
    """Write the standard data-directory layout; byte-deterministic."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "train": out / "train.jsonl",
        "train_gmr": out / "train.gmr.jsonl",
        "test": out / "test.jsonl",
        "test_gmr": out / "test.gmr.jsonl",
        "vocab": out / "vocab.txt",
    }
    paths["train"].write_text(
        instances_to_jsonl(dataset.train_instances), encoding="utf-8"
    )
    paths["train_gmr"].write_text(to_graph_json(dataset.train_graphs), encoding="utf-8")
    paths["test"].write_text(instances_to_jsonl(dataset.test_instances), encoding="utf-8")
    paths["test_gmr"].write_text(to_graph_json(dataset.test_graphs), encoding="utf-8")
    paths["vocab"].write_text(
        "\n".join(dataset.vocab_entries) + "\n", encoding="utf-8"
    )
    return paths


# ---------------------------------------------------------------------------
# loading


@dataclass
class PreparedInstance:
    instance: RcInstance
    seq: MarkedSequence
    graph: SubwordGraph

    @property
    def gold(self) -> str:
        return self.instance.relation

    @property
    def instance_id(self) -> str:
        return self.instance.instance_id


def collect_marker_tokens(
    instances: list[RcInstance], scheme: MarkerScheme
) -> tuple[str, ...]:
    """All marker surface strings the vocabulary must provide."""
    markers = list(DEFAULT_MARKERS)
    if scheme is MarkerScheme.TYPED:
        seen = set(markers)
        for inst in instances:
            if inst.subj_type is None or inst.obj_type is None:
                raise ConfigError(
                    f"instance {inst.instance_id}: typed scheme but missing types"
                )
            for m in typed_markers(inst.subj_type, inst.obj_type):
                if m not in seen:
                    seen.add(m)
                    markers.append(m)
    return tuple(markers)


def prepare_instances(
    instances: list[RcInstance],
    graphs: list[WordGraph],
    vocab: Vocab,
    scheme: MarkerScheme = MarkerScheme.ENTITY,
    max_len: int = DEFAULT_MAX_LEN,
    self_loops: bool = True,
    prune_punct: bool = False,
) -> tuple[list[PreparedInstance], int]:
    """Join instances with their graphs positionally and tokenize.

    Instances whose markers cannot survive truncation are dropped and
    counted; everything else keeps its input order.
    """
    if len(instances) != len(graphs):
        if len(instances) > len(graphs):
            missing = [i.instance_id for i in instances[len(graphs):]]
            raise JoinError(
                f"{len(missing)} instance(s) have no graph line: {missing}"
            )
        raise JoinError(
            f"graph file has {len(graphs) - len(instances)} extra line(s) "
            f"beyond the {len(instances)} instances"
        )
    items: list[PreparedInstance] = []
    n_rejected = 0
    for inst, g in zip(instances, graphs):
        if tuple(g.words) != inst.tokens:
            raise AlignmentError(
                f"instance {inst.instance_id}: graph words differ from tokens"
            )
        marked = insert_markers(inst, scheme)
        try:
            seq = tokenize(marked, vocab, max_len=max_len)
        except InstanceRejected:
            n_rejected += 1
            continue
        graph = build_subword_graph(
            g, seq, prune_punct=prune_punct, self_loops=self_loops
        )
        items.append(PreparedInstance(instance=inst, seq=seq, graph=graph))
    if n_rejected:
        log.info("rejected %d over-length instance(s)", n_rejected)
    return items, n_rejected


def load_dataset(
    instances_path: str | Path,
    gmr_path: str | Path,
    vocab_path: str | Path,
    scheme: MarkerScheme = MarkerScheme.ENTITY,
    max_len: int = DEFAULT_MAX_LEN,
    self_loops: bool = True,
    prune_punct: bool = False,
) -> tuple[list[PreparedInstance], int, Vocab]:
    """File-level wrapper around prepare_instances."""
    instances = parse_instances(Path(instances_path).read_text(encoding="utf-8"))
    graphs = parse_graph_json(Path(gmr_path).read_text(encoding="utf-8"))
    specials = collect_marker_tokens(instances, scheme)
    vocab = load_vocab(vocab_path, special_tokens=specials)
    items, n_rejected = prepare_instances(
        instances, graphs, vocab, scheme, max_len, self_loops, prune_punct
    )
    return items, n_rejected, vocab


@dataclass
class PreparedDataset:
    train: list[PreparedInstance]
    test: list[PreparedInstance]
    dev: list[PreparedInstance] = field(default_factory=list)
    schema: RelationSchema = RelationSchema(("_",))
    vocab: Vocab | None = None
    n_rejected: int = 0


def load_splits(
    data_dir: str | Path,
    scheme: MarkerScheme = MarkerScheme.ENTITY,
    max_len: int = DEFAULT_MAX_LEN,
    self_loops: bool = True,
    prune_punct: bool = False,
    na_label: str | None = None,
    gmr_dir: str | Path | None = None,
) -> PreparedDataset:
    """Load the standard layout written by write_synthetic.

    ``gmr_dir`` points the *.gmr.jsonl files somewhere else, which is how a
    parser-source sweep swaps graph providers while sharing instances.
    """
    base = Path(data_dir)
    graphs_base = Path(gmr_dir) if gmr_dir is not None else base
    all_instances: dict[str, list[RcInstance]] = {}
    for split in ("train", "test", "dev"):
        path = base / f"{split}.jsonl"
        if not path.exists():
            if split == "dev":
                continue
            raise JoinError(f"missing {path}")
        all_instances[split] = parse_instances(path.read_text(encoding="utf-8"))

    specials = collect_marker_tokens(
        [i for split in all_instances.values() for i in split], scheme
    )
    vocab = load_vocab(base / "vocab.txt", special_tokens=specials)

    prepared: dict[str, list[PreparedInstance]] = {}
    n_rejected = 0
    for split, instances in all_instances.items():
        gmr_path = graphs_base / f"{split}.gmr.jsonl"
        if not gmr_path.exists():
            raise JoinError(f"missing {gmr_path}")
        graphs = parse_graph_json(gmr_path.read_text(encoding="utf-8"))
        items, rejected = prepare_instances(
            instances, graphs, vocab, scheme, max_len, self_loops, prune_punct
        )
        prepared[split] = items
        n_rejected += rejected

    labels = {i.relation for split in all_instances.values() for i in split}
    schema = RelationSchema.from_labels(labels, na_label)
    return PreparedDataset(
        train=prepared.get("train", []),
        test=prepared.get("test", []),
        dev=prepared.get("dev", []),
        schema=schema,
        vocab=vocab,
        n_rejected=n_rejected,
    )


# ---------------------------------------------------------------------------
# entity-group analysis


def load_pronoun_lexicon(path: str | Path | None = None) -> frozenset[str]:
    """The shipped English pronoun list, or a custom one-per-line file."""
    if path is None:
        text = (
            resources.files("relgraph.resources")
            .joinpath("pronouns.txt")
            .read_text(encoding="utf-8")
        )
    else:
        text = Path(path).read_text(encoding="utf-8")
    return frozenset(
        line.strip().lower() for line in text.splitlines() if line.strip()
    )


def group_split(
    instances: list[RcInstance], pronoun_lexicon: frozenset[str] | set[str]
) -> tuple[list[RcInstance], list[RcInstance]]:
    """Partition instances into (mention group, pronoun group).

    An instance is pronominal iff any word of either entity span, lowercased,
    is in the lexicon.
    """
    if not pronoun_lexicon:
        raise ConfigError("pronoun lexicon must be non-empty")
    mention, pronoun = [], []
    for inst in instances:
        spans = [inst.tokens[s:e] for s, e in (inst.subj_span, inst.obj_span)]
        words = [w.lower() for span in spans for w in span]
        if any(w in pronoun_lexicon for w in words):
            pronoun.append(inst)
        else:
            mention.append(inst)
    return mention, pronoun
