import pytest
from hypothesis import given, settings, strategies as st

from relgraph.errors import AlignmentError, DegenerateGraphError
from relgraph.gmr import Edge, Framework, WordGraph, to_undirected_untyped
from relgraph.graph import (
    Provenance,
    SubwordGraph,
    build_subword_graph,
    neighbors,
    randomize_graph,
)
from relgraph.tokenizer import MarkerScheme, RcInstance, Vocab, insert_markers, tokenize

VOCAB = Vocab(
    ["jong", "##-", "##un", "ko", "yong", "##hi", "was", "born", "to", "a", "b", "c"]
)


def prep(tokens, edges, subj, obj, self_loops=True, prune_punct=False,
         framework=Framework.UD):
    g = WordGraph(tuple(tokens), tuple(Edge(*e) for e in edges), framework)
    inst = RcInstance(
        instance_id="g-0",
        tokens=tuple(tokens),
        subj_span=subj,
        obj_span=obj,
        relation="r",
    )
    seq = tokenize(insert_markers(inst, MarkerScheme.ENTITY), VOCAB)
    sg = build_subword_graph(g, seq, prune_punct=prune_punct, self_loops=self_loops)
    return g, seq, sg


def test_single_word_only_special_edges():
    # identical one-word spans: both entities wrap the same single-piece word
    _, seq, sg = prep(["a"], [], (0, 1), (0, 1))
    assert sg.edges_of(Provenance.DEPENDENCY) == set()
    assert sg.edges_of(Provenance.SUBWORD) == set()
    assert len(sg.edges_of(Provenance.SPECIAL)) == 4


def test_three_piece_word_star():
    _, seq, sg = prep(["jong-un", "a", "b"], [(1, 0, "x"), (1, 2, "y")], (1, 2), (2, 3))
    subs = sg.edges_of(Provenance.SUBWORD)
    assert len(subs) == 2
    first = seq.first_subword_of_word[0]
    assert all(first in pair for pair in subs)


def test_name_sentence_special_edges():
    # subject pieces jong/##-/##un: opening marker connects to each piece
    # and to the closing marker, 4 special edges on the subject side
    _, seq, sg = prep(
        ["jong-un", "was", "born", "to", "ko", "yong-hi"],
        [(2, 0, "nsubj"), (2, 1, "aux"), (2, 4, "obl"), (4, 3, "case"), (4, 5, "flat")],
        (0, 1),
        (4, 6),
    )
    spec = sg.edges_of(Provenance.SPECIAL)
    subj_side = {p for p in spec if seq.subj_anchor in p}
    assert len(subj_side) == 4
    pieces = set(seq.subword_positions_of_word[0])
    expected = {tuple(sorted((seq.subj_anchor, x))) for x in pieces | {seq.subj_close}}
    assert subj_side == expected


def test_edge_count_identity_without_collisions():
    g, seq, sg = prep(
        ["jong-un", "was", "born", "to", "ko", "yong-hi"],
        [(2, 0, "nsubj"), (2, 1, "aux"), (2, 4, "obl"), (4, 3, "case"), (4, 5, "flat")],
        (0, 1),
        (4, 6),
    )
    dep = len(to_undirected_untyped(g))
    sub = sum(
        max(0, len(p) - 1) for p in seq.subword_positions_of_word
    )
    spec = (
        sum(len(seq.subword_positions_of_word[w]) for w in seq.subj_words) + 1
        + sum(len(seq.subword_positions_of_word[w]) for w in seq.obj_words) + 1
    )
    assert sg.n_edges == dep + sub + spec
    assert len(sg.edges_of(Provenance.DEPENDENCY)) == dep
    assert len(sg.edges_of(Provenance.SUBWORD)) == sub
    assert len(sg.edges_of(Provenance.SPECIAL)) == spec


def test_dependency_edges_connect_first_subwords():
    g, seq, sg = prep(
        ["jong-un", "yong-hi", "a"], [(2, 0, "x"), (2, 1, "y")], (0, 1), (1, 2)
    )
    first = seq.first_subword_of_word
    expected = {
        tuple(sorted((first[2], first[0]))),
        tuple(sorted((first[2], first[1]))),
    }
    assert sg.edges_of(Provenance.DEPENDENCY) == expected


def test_markers_receive_no_dependency_edges():
    _, seq, sg = prep(["a", "b", "c"], [(1, 0, "x"), (1, 2, "y")], (0, 1), (2, 3))
    marker_nodes = {p for p, w in enumerate(seq.word_of_subword) if w is None}
    for pair in sg.edges_of(Provenance.DEPENDENCY) | sg.edges_of(Provenance.SUBWORD):
        assert not (set(pair) & marker_nodes)


def test_prune_punct_drops_edges_of_punct_words():
    tokens = ["a", "b", "c"]
    edges = [(1, 0, "nsubj"), (1, 2, "punct")]
    _, _, sg_keep = prep(tokens, edges, (0, 1), (1, 2), prune_punct=False)
    _, _, sg_pruned = prep(tokens, edges, (0, 1), (1, 2), prune_punct=True)
    assert len(sg_keep.edges_of(Provenance.DEPENDENCY)) == 2
    assert len(sg_pruned.edges_of(Provenance.DEPENDENCY)) == 1


def test_word_count_mismatch_raises():
    g = WordGraph(("a", "b"), (Edge(0, 1, "x"),), Framework.UD)
    inst = RcInstance("bad-1", ("a", "b", "c"), (0, 1), (2, 3), "r")
    seq = tokenize(insert_markers(inst, MarkerScheme.ENTITY), VOCAB)
    with pytest.raises(AlignmentError, match="bad-1"):
        build_subword_graph(g, seq)


def test_symmetry_and_dedup():
    _, _, sg = prep(
        ["jong-un", "was", "born"], [(2, 0, "s"), (2, 1, "a")], (0, 1), (1, 2)
    )
    for i in range(sg.n):
        for j in sg.adjacency[i]:
            assert i in sg.adjacency[j]
        assert len(set(sg.adjacency[i])) == len(sg.adjacency[i])
    for pair in sg.edge_provenance:
        assert pair[0] < pair[1]


def test_build_independent_of_edge_order():
    tokens = ["a", "b", "c"]
    e1 = [(1, 0, "x"), (1, 2, "y")]
    e2 = [(1, 2, "y"), (1, 0, "x")]
    _, _, sg1 = prep(tokens, e1, (0, 1), (2, 3))
    _, _, sg2 = prep(tokens, e2, (0, 1), (2, 3))
    assert sg1.adjacency == sg2.adjacency
    assert sg1.edge_provenance == sg2.edge_provenance


# -- neighbors ---------------------------------------------------------------


def path_graph(n, self_loops):
    edges = {(i, i + 1): Provenance.DEPENDENCY for i in range(n - 1)}
    return SubwordGraph.from_edges(n, edges, self_loops, tuple(range(n)))


def test_neighbors_with_self_loops():
    sg = path_graph(3, self_loops=True)
    assert neighbors(sg, 1) == [0, 1, 2]


def test_neighbors_isolated_fallback():
    sg = SubwordGraph.from_edges(2, {}, self_loops=False, first_subword_nodes=(0, 1))
    assert neighbors(sg, 0) == [0]


def test_neighbors_out_of_range():
    sg = path_graph(3, self_loops=True)
    with pytest.raises(IndexError):
        neighbors(sg, 3)


def test_neighbors_match_edge_scan_oracle():
    _, _, sg = prep(
        ["jong-un", "was", "born", "to", "ko", "yong-hi"],
        [(2, 0, "nsubj"), (2, 1, "aux"), (2, 4, "obl"), (4, 3, "case"), (4, 5, "flat")],
        (0, 1),
        (4, 6),
        self_loops=False,
    )
    for i in range(sg.n):
        scan = sorted(
            ({a, b} - {i}).pop() for a, b in sg.edge_provenance if i in (a, b)
        )
        expected = scan if scan else [i]
        assert neighbors(sg, i) == expected


# -- randomization -------------------------------------------------------------


def test_randomize_no_dependency_edges_is_identity():
    sg = SubwordGraph.from_edges(
        4, {(0, 1): Provenance.SPECIAL}, True, first_subword_nodes=(0, 1, 2)
    )
    assert randomize_graph(sg, seed=1) is sg


def test_randomize_preserves_counts_and_other_edges():
    edges = {(i, i + 1): Provenance.DEPENDENCY for i in range(5)}
    edges[(0, 7)] = Provenance.SPECIAL
    edges[(3, 8)] = Provenance.SUBWORD
    sg = SubwordGraph.from_edges(9, edges, True, first_subword_nodes=tuple(range(7)))
    out = randomize_graph(sg, seed=9)
    assert out.n == sg.n
    assert out.self_loops == sg.self_loops
    assert len(out.edges_of(Provenance.DEPENDENCY)) == 5
    assert out.edges_of(Provenance.SPECIAL) == sg.edges_of(Provenance.SPECIAL)
    assert out.edges_of(Provenance.SUBWORD) == sg.edges_of(Provenance.SUBWORD)
    for i, j in out.edges_of(Provenance.DEPENDENCY):
        assert i in sg.first_subword_nodes and j in sg.first_subword_nodes


def test_randomize_deterministic_and_seed_sensitive():
    edges = {(i, i + 1): Provenance.DEPENDENCY for i in range(10)}
    sg = SubwordGraph.from_edges(30, edges, True, first_subword_nodes=tuple(range(30)))
    a = randomize_graph(sg, seed=123)
    b = randomize_graph(sg, seed=123)
    assert a.edge_provenance == b.edge_provenance
    distinct = {
        frozenset(randomize_graph(sg, seed=s).edges_of(Provenance.DEPENDENCY))
        for s in range(100)
    }
    assert len(distinct) >= 99


def test_randomize_degenerate():
    sg = SubwordGraph.from_edges(
        3, {(0, 1): Provenance.DEPENDENCY}, True, first_subword_nodes=(0,)
    )
    with pytest.raises(DegenerateGraphError):
        randomize_graph(sg, seed=0)


# -- property: symmetry + dedup over random word graphs ------------------------


@st.composite
def random_cases(draw):
    n = draw(st.integers(min_value=2, max_value=6))
    tokens = [draw(st.sampled_from(["a", "b", "c", "jong-un", "yong-hi"]))
              for _ in range(n)]
    pairs = draw(
        st.lists(
            st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)),
            max_size=8,
            unique=True,
        )
    )
    edges = [(h, d, "dep") for h, d in pairs if h != d]
    s = draw(st.integers(0, n - 1))
    o = draw(st.integers(0, n - 1))
    if s == o:
        subj = obj = (s, s + 1)
    else:
        subj, obj = (min(s, o), min(s, o) + 1), (max(s, o), max(s, o) + 1)
    return tokens, edges, subj, obj


@settings(max_examples=60, deadline=None)
@given(random_cases())
def test_property_symmetric_dedup(case):
    tokens, edges, subj, obj = case
    _, _, sg = prep(tokens, edges, subj, obj, framework=Framework.GENERIC)
    seen = set()
    for i in range(sg.n):
        assert list(sg.adjacency[i]) == sorted(set(sg.adjacency[i]))
        for j in sg.adjacency[i]:
            assert i != j
            assert i in sg.adjacency[j]
            seen.add((min(i, j), max(i, j)))
    assert seen == set(sg.edge_provenance)
