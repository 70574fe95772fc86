"""Lifting a word-level graph onto the subword sequence.

Three undirected, untyped edge constructs make up the subword graph:
dependency edges between the first subwords of words that are connected at
the word level, subword edges from each word's first piece to its remaining
pieces, and special edges from each entity's opening marker to every subword
of the entity's words and to its closing marker.  A randomization policy
replaces the dependency edges with random ones of equal count, which is the
control used to check that genuine structure, not extra wiring, drives any
gains.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from enum import Enum

from .errors import AlignmentError, ContractError, DegenerateGraphError
from .gmr import WordGraph, to_undirected_untyped
from .tokenizer import MarkedSequence

log = logging.getLogger(__name__)


class Provenance(str, Enum):
    DEPENDENCY = "dep"
    SUBWORD = "sub"
    SPECIAL = "spec"


Pair = tuple[int, int]


def _norm(i: int, j: int) -> Pair:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class SubwordGraph:
    """Undirected untyped adjacency over subword positions.

    Self-loops are never stored; ``neighbors`` adds them on the fly when the
    ``self_loops`` flag is set.  ``first_subword_nodes`` records which nodes
    anchor words, which is what the randomization policy samples from.
    """

    n: int
    adjacency: tuple[tuple[int, ...], ...]
    edge_provenance: dict[Pair, Provenance]
    self_loops: bool
    first_subword_nodes: tuple[int, ...] = field(default=())

    @staticmethod
    def from_edges(
        n: int,
        edges: dict[Pair, Provenance],
        self_loops: bool,
        first_subword_nodes: tuple[int, ...] = (),
    ) -> "SubwordGraph":
        adj: list[list[int]] = [[] for _ in range(n)]
        norm_edges: dict[Pair, Provenance] = {}
        for (i, j), prov in edges.items():
            if not (0 <= i < n and 0 <= j < n):
                raise ContractError(f"edge ({i}, {j}) out of range for n={n}")
            if i == j:
                raise ContractError(f"self pair ({i}, {j}) cannot be stored")
            pair = _norm(i, j)
            if pair in norm_edges:
                continue
            norm_edges[pair] = prov
            adj[pair[0]].append(pair[1])
            adj[pair[1]].append(pair[0])
        return SubwordGraph(
            n=n,
            adjacency=tuple(tuple(sorted(a)) for a in adj),
            edge_provenance=norm_edges,
            self_loops=self_loops,
            first_subword_nodes=tuple(sorted(first_subword_nodes)),
        )

    def edges_of(self, prov: Provenance) -> set[Pair]:
        return {p for p, v in self.edge_provenance.items() if v is prov}

    @property
    def n_edges(self) -> int:
        return len(self.edge_provenance)


def build_subword_graph(
    g: WordGraph,
    seq: MarkedSequence,
    prune_punct: bool = False,
    self_loops: bool = True,
) -> SubwordGraph:
    """Assemble the subword graph for one instance.

    ``seq`` must tokenize exactly the words of ``g``; with ``prune_punct``
    words attached by a "punct" relation contribute no dependency edges.
    Colliding constructs (the same pair produced twice) keep the first
    provenance and are logged.
    """
    if g.n_words != seq.n_words_total:
        raise AlignmentError(
            f"instance {seq.instance_id!r}: graph has {g.n_words} words but "
            f"sequence aligns {seq.n_words_total}"
        )
    n = seq.n
    edges: dict[Pair, Provenance] = {}

    def put(i: int, j: int, prov: Provenance) -> None:
        pair = _norm(i, j)
        if pair in edges:
            log.warning(
                "instance %r: edge %s (%s) collides with existing %s edge",
                seq.instance_id,
                pair,
                prov.value,
                edges[pair].value,
            )
            return
        edges[pair] = prov

    punct_words: set[int] = set()
    if prune_punct:
        punct_words = {e.dep for e in g.edges if e.label == "punct"}

    first = seq.first_subword_of_word
    for u, w in sorted(to_undirected_untyped(g)):
        if u in punct_words or w in punct_words:
            continue
        fu, fw = first[u], first[w]
        if fu is None or fw is None:
            continue  # word dropped by truncation
        put(fu, fw, Provenance.DEPENDENCY)

    for w in range(seq.n_words_total):
        pieces = seq.subword_positions_of_word[w]
        for p in pieces[1:]:
            put(pieces[0], p, Provenance.SUBWORD)

    for anchor, close, words in (
        (seq.subj_anchor, seq.subj_close, seq.subj_words),
        (seq.obj_anchor, seq.obj_close, seq.obj_words),
    ):
        for w in words:
            for p in seq.subword_positions_of_word[w]:
                put(anchor, p, Provenance.SPECIAL)
        put(anchor, close, Provenance.SPECIAL)

    first_nodes = tuple(p for p in first if p is not None)
    return SubwordGraph.from_edges(n, edges, self_loops, first_nodes)


class RandomPolicy(str, Enum):
    SHUFFLE_DEPENDENCY = "shuffle_dependency"


_MAX_REJECTIONS_PER_EDGE = 10_000


def randomize_graph(
    sg: SubwordGraph,
    seed: int,
    policy: RandomPolicy = RandomPolicy.SHUFFLE_DEPENDENCY,
) -> SubwordGraph:
    """Replace dependency edges with random pairs of equal count.

    The replacement pairs are distinct unordered pairs drawn uniformly among
    first-subword nodes, rejection-sampling duplicates; subword and special
    edges are untouched.  Deterministic for a given seed.
    """
    if policy is not RandomPolicy.SHUFFLE_DEPENDENCY:
        raise ContractError(f"unknown randomization policy {policy!r}")
    dep_pairs = sg.edges_of(Provenance.DEPENDENCY)
    if not dep_pairs:
        return sg
    nodes = sg.first_subword_nodes
    if len(nodes) < 2:
        raise DegenerateGraphError(
            f"cannot draw {len(dep_pairs)} random pairs among "
            f"{len(nodes)} first-subword nodes"
        )
    keep = {p: v for p, v in sg.edge_provenance.items() if v is not Provenance.DEPENDENCY}
    rng = random.Random(seed)
    chosen: set[Pair] = set()
    budget = _MAX_REJECTIONS_PER_EDGE * len(dep_pairs)
    while len(chosen) < len(dep_pairs):
        i = nodes[rng.randrange(len(nodes))]
        j = nodes[rng.randrange(len(nodes))]
        budget -= 1
        if budget < 0:
            raise DegenerateGraphError(
                f"rejection sampling stalled: {len(dep_pairs)} pairs requested "
                f"among {len(nodes)} nodes"
            )
        if i == j:
            continue
        pair = _norm(i, j)
        if pair in chosen or pair in keep:
            continue
        chosen.add(pair)
    merged = dict(keep)
    for pair in chosen:
        merged[pair] = Provenance.DEPENDENCY
    return SubwordGraph.from_edges(sg.n, merged, sg.self_loops, nodes)


def neighbors(sg: SubwordGraph, i: int) -> list[int]:
    """Sorted neighbor list of node i.

    Includes i itself iff self-loops are enabled; an isolated node with
    self-loops disabled falls back to [i] so that neighborhood means are
    always defined.
    """
    if not (0 <= i < sg.n):
        raise IndexError(f"node {i} out of range for n={sg.n}")
    adj = sg.adjacency[i]
    if sg.self_loops:
        return sorted((*adj, i))
    if not adj:
        return [i]
    return list(adj)
