import json
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from relgraph.errors import GraphError, ParseError
from relgraph.gmr import (
    Edge,
    Framework,
    WordGraph,
    parse_conllu,
    parse_graph_json,
    to_conllu,
    to_graph_json,
    to_undirected_untyped,
    validate_graph,
)

FIXTURES = Path(__file__).parent / "fixtures"

TWO_TOKEN = (
    "1\tHe\t_\t_\t_\t_\t2\tnsubj\t_\t_\n"
    "2\truns\t_\t_\t_\t_\t0\troot\t_\t_\n"
)


def test_parse_conllu_minimal():
    graphs = parse_conllu(TWO_TOKEN)
    assert len(graphs) == 1
    g = graphs[0]
    assert g.words == ("He", "runs")
    assert g.edges == (Edge(1, 0, "nsubj"),)
    assert g.framework is Framework.UD


def test_parse_conllu_empty_input():
    assert parse_conllu("") == []


def test_parse_conllu_skips_ranges_and_empty_nodes():
    text = (
        "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n"
        "1\tdo\t_\t_\t_\t_\t0\troot\t_\t_\n"
        "2\tnot\t_\t_\t_\t_\t1\tadvmod\t_\t_\n"
        "2.1\t_\t_\t_\t_\t_\t_\t_\t_\t_\n"
    )
    (g,) = parse_conllu(text)
    assert g.words == ("do", "not")
    assert g.edges == (Edge(0, 1, "advmod"),)


def test_parse_conllu_bad_column_count_names_line():
    text = "1\tHe\t2\tnsubj\n"
    with pytest.raises(ParseError, match="line 1"):
        parse_conllu(text)


def test_parse_conllu_non_integer_head():
    text = "1\tHe\t_\t_\t_\t_\tX\tnsubj\t_\t_\n"
    with pytest.raises(ParseError, match="HEAD"):
        parse_conllu(text)


def test_parse_conllu_head_out_of_range():
    text = "1\tHe\t_\t_\t_\t_\t5\tnsubj\t_\t_\n"
    with pytest.raises(ParseError, match="out of range"):
        parse_conllu(text)


def _scan_fixture_counts(text):
    """Independent oracle: token and root counts per block by line scanning."""
    counts = []
    tokens = roots = 0
    for line in text.splitlines():
        if not line.strip():
            if tokens:
                counts.append((tokens, roots))
            tokens = roots = 0
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        wid = cols[0]
        if "-" in wid or "." in wid:
            continue
        tokens += 1
        if cols[6] == "0":
            roots += 1
    if tokens:
        counts.append((tokens, roots))
    return counts


def test_parse_conllu_fixture_edge_counts():
    text = (FIXTURES / "treebank_50.conllu").read_text()
    graphs = parse_conllu(text)
    expected = _scan_fixture_counts(text)
    assert len(graphs) == 50
    assert len(expected) == 50
    for g, (tokens, roots) in zip(graphs, expected):
        assert g.n_words == tokens
        assert len(g.edges) == tokens - roots


def test_conllu_round_trip_idempotent_on_fixture():
    text = (FIXTURES / "treebank_50.conllu").read_text()
    first = parse_conllu(text)
    second = parse_conllu(to_conllu(first))
    assert first == second
    # serialization is canonical: one more cycle is byte-identical
    assert to_conllu(first) == to_conllu(second)


def test_fixture_trees_are_forests():
    text = (FIXTURES / "treebank_50.conllu").read_text()
    for g in parse_conllu(text):
        report = validate_graph(g)
        assert report.is_single_headed and report.is_acyclic
        roots = g.n_words - len({e.dep for e in g.edges})
        assert len(g.edges) == g.n_words - roots


def test_to_conllu_rejects_multi_headed():
    g = WordGraph(("a", "b", "c"), (Edge(0, 1, "x"), Edge(2, 1, "y")), Framework.DM)
    with pytest.raises(GraphError, match="multiple heads"):
        to_conllu([g])


def test_parse_graph_json_minimal():
    line = json.dumps(
        {
            "words": ["a", "b"],
            "edges": [{"head": 1, "dep": 0, "label": "ARG1"}],
            "framework": "DM",
        }
    )
    (g,) = parse_graph_json(line)
    assert g.words == ("a", "b")
    assert g.edges == (Edge(1, 0, "ARG1"),)


def test_parse_graph_json_preserves_multiple_heads():
    line = json.dumps(
        {
            "words": ["a", "b", "c"],
            "edges": [
                {"head": 0, "dep": 1, "label": "ARG1"},
                {"head": 2, "dep": 1, "label": "ARG2"},
            ],
            "framework": "SDP",
        }
    )
    (g,) = parse_graph_json(line)
    heads_of_1 = [e.head for e in g.edges if e.dep == 1]
    assert sorted(heads_of_1) == [0, 2]


def test_parse_graph_json_round_trip_fixture():
    text = (FIXTURES / "semgraphs_20.jsonl").read_text()
    graphs = parse_graph_json(text)
    assert len(graphs) == 20
    serialized = to_graph_json(graphs)
    assert parse_graph_json(serialized) == graphs
    assert to_graph_json(parse_graph_json(serialized)) == serialized


def test_parse_graph_json_missing_field():
    with pytest.raises(ParseError, match="missing field"):
        parse_graph_json(json.dumps({"words": ["a"], "edges": []}))


def test_parse_graph_json_index_out_of_range():
    line = json.dumps(
        {
            "words": ["a"],
            "edges": [{"head": 0, "dep": 3, "label": "x"}],
            "framework": "DM",
        }
    )
    with pytest.raises(ParseError, match="out of range"):
        parse_graph_json(line)


def test_parse_graph_json_unknown_framework_lists_allowed():
    line = json.dumps({"words": ["a"], "edges": [], "framework": "AMR"})
    with pytest.raises(ParseError) as exc:
        parse_graph_json(line)
    for allowed in ("UD", "DEP", "DM", "SDP", "GENERIC"):
        assert allowed in str(exc.value)


def test_wordgraph_rejects_self_edge_and_duplicates():
    with pytest.raises(GraphError):
        WordGraph(("a",), (Edge(0, 0, "x"),), Framework.UD)
    with pytest.raises(GraphError):
        WordGraph(("a", "b"), (Edge(0, 1, "x"), Edge(0, 1, "x")), Framework.UD)


def test_validate_chain_is_clean():
    g = WordGraph(("a", "b", "c"), (Edge(0, 1, "x"), Edge(1, 2, "y")), Framework.UD)
    report = validate_graph(g)
    assert report.is_single_headed
    assert report.is_acyclic
    assert report.is_connected
    assert report.violations == []


def test_validate_multi_head_ud_vs_dm():
    edges = (Edge(0, 1, "x"), Edge(2, 1, "y"))
    ud = validate_graph(WordGraph(("a", "b", "c"), edges, Framework.UD))
    dm = validate_graph(WordGraph(("a", "b", "c"), edges, Framework.DM))
    assert not ud.is_single_headed
    assert len(ud.violations) == 1
    assert not dm.is_single_headed
    assert dm.violations == []


def test_validate_detects_directed_cycle_and_disconnection():
    cyc = WordGraph(("a", "b"), (Edge(0, 1, "x"), Edge(1, 0, "y")), Framework.UD)
    report = validate_graph(cyc)
    assert not report.is_acyclic
    assert any("cycle" in v for v in report.violations)

    disc = WordGraph(("a", "b", "c"), (Edge(0, 1, "x"),), Framework.UD)
    report = validate_graph(disc)
    assert not report.is_connected
    assert report.unattached_word_indices == [2]
    assert any("connected" in v for v in report.violations)
    # same shape under DM: reported, not a violation
    report_dm = validate_graph(
        WordGraph(("a", "b", "c"), (Edge(0, 1, "x"),), Framework.DM)
    )
    assert report_dm.unattached_word_indices == [2]
    assert report_dm.violations == []


def test_validate_does_not_mutate():
    g = WordGraph(("a", "b", "c"), (Edge(0, 1, "x"), Edge(2, 1, "y")), Framework.UD)
    before = (g.words, g.edges, g.framework)
    validate_graph(g)
    assert (g.words, g.edges, g.framework) == before


def test_to_undirected_collapses_reciprocal():
    g = WordGraph(("a", "b"), (Edge(0, 1, "nsubj"), Edge(1, 0, "X")), Framework.DM)
    assert to_undirected_untyped(g) == {(0, 1)}


def test_to_undirected_empty():
    g = WordGraph(("a",), (), Framework.UD)
    assert to_undirected_untyped(g) == set()


def test_to_undirected_on_example_tree():
    # transcription of the running name-sentence dependency tree
    words = ("Jong-Un", "was", "born", "to", "Ko", "Yong-Hi")
    edges = (
        Edge(2, 0, "nsubj:pass"),
        Edge(2, 1, "aux:pass"),
        Edge(2, 4, "obl"),
        Edge(4, 3, "case"),
        Edge(4, 5, "flat"),
    )
    g = WordGraph(words, edges, Framework.UD)
    pairs = to_undirected_untyped(g)
    assert len(pairs) == len(g.edges)  # a tree has no reciprocal duplicates


@st.composite
def word_graphs(draw):
    n = draw(st.integers(min_value=1, max_value=8))
    words = tuple(f"w{i}" for i in range(n))
    triples = draw(
        st.lists(
            st.tuples(
                st.integers(0, n - 1),
                st.integers(0, n - 1),
                st.sampled_from(["a", "b", "c"]),
            ),
            max_size=12,
            unique=True,
        )
    )
    edges = tuple(Edge(h, d, l) for h, d, l in triples if h != d)
    framework = draw(st.sampled_from(list(Framework)))
    return WordGraph(words, edges, framework)


@given(word_graphs())
def test_undirected_size_bound(g):
    pairs = to_undirected_untyped(g)
    assert len(pairs) <= len(g.edges)
    distinct_directed_pairs = {(min(e.head, e.dep), max(e.head, e.dep)) for e in g.edges}
    # equality holds exactly when no two directed edges share an unordered pair
    if len(g.edges) == len(distinct_directed_pairs):
        assert len(pairs) == len(g.edges)
    else:
        assert len(pairs) < len(g.edges)
