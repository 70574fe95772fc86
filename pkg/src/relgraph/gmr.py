"""Ingestion and validation of word-level graph meaning representations.

Two input formats are supported: CoNLL-U for dependency trees and a
one-object-per-line JSON interchange format for semantic graphs whose words
may carry multiple heads.  Both parse into the canonical :class:`WordGraph`,
which stores 0-based word indices and a sorted, duplicate-free edge list.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple

from .errors import GraphError, ParseError

CONLLU_COLUMNS = 10


class Framework(str, Enum):
    """Which family of graph meaning representation a graph belongs to.

    UD and DEP are syntactic dependency trees (single head per word); DM and
    SDP are bilexical semantic graphs where words may have several heads and
    non-content words may stay unattached.  GENERIC makes no structural
    promises and is validated as leniently as DM/SDP.
    """

    UD = "UD"
    DEP = "DEP"
    DM = "DM"
    SDP = "SDP"
    GENERIC = "GENERIC"


TREE_FRAMEWORKS = frozenset({Framework.UD, Framework.DEP})


class Edge(NamedTuple):
    head: int
    dep: int
    label: str


@dataclass(frozen=True)
class WordGraph:
    """A sentence's words plus directed labeled bilexical edges.

    Edges are canonicalized to sorted order at construction so that parsing,
    serialization and equality are all independent of input edge order.
    """

    words: tuple[str, ...]
    edges: tuple[Edge, ...]
    framework: Framework

    def __post_init__(self) -> None:
        n = len(self.words)
        seen: set[Edge] = set()
        for e in self.edges:
            if not (0 <= e.head < n and 0 <= e.dep < n):
                raise GraphError(
                    f"edge {e} out of range for {n} words"
                )
            if e.head == e.dep:
                raise GraphError(f"self-edge at word {e.head}")
            if e in seen:
                raise GraphError(f"duplicate edge {e}")
            seen.add(e)
        object.__setattr__(self, "edges", tuple(sorted(self.edges)))

    @property
    def n_words(self) -> int:
        return len(self.words)


@dataclass
class ValidationReport:
    """Structural summary of one WordGraph.

    ``violations`` is non-empty only when the graph breaks a promise its own
    framework makes (tree frameworks must be single-headed, acyclic and
    connected); multi-head or unattached words in DM/SDP are informational.
    """

    framework: Framework
    is_single_headed: bool
    is_acyclic: bool
    is_connected: bool
    unattached_word_indices: list[int] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _split_sentences(text: str) -> Iterable[tuple[int, list[tuple[int, str]]]]:
    """Yield (starting line number, [(line number, line), ...]) per block."""
    block: list[tuple[int, str]] = []
    start = 1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if line.strip() == "":
            if block:
                yield start, block
                block = []
            start = lineno + 1
        else:
            block.append((lineno, line))
    if block:
        yield start, block


def parse_conllu(text: str, framework: Framework = Framework.UD) -> list[WordGraph]:
    """Parse CoNLL-U text into one WordGraph per sentence.

    Comment lines start with '#'.  Multiword-token ranges (id "3-4") and
    empty nodes (id "5.1") are skipped.  HEAD h > 0 becomes the edge
    (h-1 -> id-1) labeled with DEPREL; the root line (HEAD 0) adds no edge.
    """
    graphs: list[WordGraph] = []
    for _, block in _split_sentences(text):
        words: list[str] = []
        # (lineno, 1-based id, head, deprel), resolved to edges after the
        # block is read so that forward references to heads are legal.
        rows: list[tuple[int, int, int, str]] = []
        for lineno, line in block:
            if line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != CONLLU_COLUMNS:
                raise ParseError(
                    f"line {lineno}: expected {CONLLU_COLUMNS} tab-separated "
                    f"columns, got {len(cols)}"
                )
            wid = cols[0]
            if "-" in wid or "." in wid:
                continue  # multiword-token range or empty node
            try:
                idx = int(wid)
            except ValueError as exc:
                raise ParseError(f"line {lineno}: non-integer ID {wid!r}") from exc
            try:
                head = int(cols[6])
            except ValueError as exc:
                raise ParseError(
                    f"line {lineno}: non-integer HEAD {cols[6]!r}"
                ) from exc
            words.append(cols[1])
            if idx != len(words):
                raise ParseError(
                    f"line {lineno}: word ID {idx} out of sequence "
                    f"(expected {len(words)})"
                )
            rows.append((lineno, idx, head, cols[7]))
        if not words:
            continue
        edges: list[Edge] = []
        for lineno, idx, head, deprel in rows:
            if head < 0 or head > len(words):
                raise ParseError(
                    f"line {lineno}: HEAD {head} out of range for "
                    f"{len(words)} words"
                )
            if head > 0:
                edges.append(Edge(head - 1, idx - 1, deprel))
        graphs.append(WordGraph(tuple(words), tuple(edges), framework))
    return graphs


def to_conllu(graphs: Iterable[WordGraph]) -> str:
    """Serialize single-headed graphs back to canonical CoNLL-U.

    Only FORM, HEAD and DEPREL are populated; parsing the result reproduces
    the input graphs exactly.  Multi-headed graphs cannot be represented and
    raise GraphError.
    """
    out: list[str] = []
    for g in graphs:
        head_of: dict[int, tuple[int, str]] = {}
        for e in g.edges:
            if e.dep in head_of:
                raise GraphError(
                    f"word {e.dep} has multiple heads; not representable in CoNLL-U"
                )
            head_of[e.dep] = (e.head + 1, e.label)
        for i, form in enumerate(g.words):
            head, deprel = head_of.get(i, (0, "root"))
            cols = [str(i + 1), form, "_", "_", "_", "_", str(head), deprel, "_", "_"]
            out.append("\t".join(cols))
        out.append("")
    return "\n".join(out) + ("\n" if out else "")


_JSON_FIELDS = frozenset({"words", "edges", "framework"})
_EDGE_FIELDS = frozenset({"head", "dep", "label"})


def parse_graph_json(text: str) -> list[WordGraph]:
    """Parse the newline-delimited JSON graph interchange format.

    Each line is an object with exactly the fields "words", "edges" and
    "framework"; each edge object has exactly "head", "dep" and "label".
    Multiple heads per word are preserved.
    """
    graphs: list[WordGraph] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {lineno}: invalid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise ParseError(f"line {lineno}: expected a JSON object")
        missing = _JSON_FIELDS - obj.keys()
        if missing:
            raise ParseError(
                f"line {lineno}: missing field(s) {sorted(missing)}"
            )
        extra = obj.keys() - _JSON_FIELDS
        if extra:
            raise ParseError(
                f"line {lineno}: unknown field(s) {sorted(extra)}"
            )
        words = obj["words"]
        if not isinstance(words, list) or not all(isinstance(w, str) for w in words):
            raise ParseError(f"line {lineno}: \"words\" must be a list of strings")
        try:
            framework = Framework(obj["framework"])
        except ValueError:
            allowed = ", ".join(f.value for f in Framework)
            raise ParseError(
                f"line {lineno}: unknown framework {obj['framework']!r}; "
                f"allowed: {allowed}"
            ) from None
        edges: list[Edge] = []
        for e in obj["edges"]:
            if not isinstance(e, dict) or set(e.keys()) != _EDGE_FIELDS:
                raise ParseError(
                    f"line {lineno}: each edge needs exactly the fields "
                    f"{sorted(_EDGE_FIELDS)}"
                )
            if not isinstance(e["head"], int) or not isinstance(e["dep"], int):
                raise ParseError(f"line {lineno}: edge indices must be integers")
            edges.append(Edge(e["head"], e["dep"], str(e["label"])))
        try:
            graphs.append(WordGraph(tuple(words), tuple(edges), framework))
        except GraphError as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
    return graphs


def to_graph_json(graphs: Iterable[WordGraph]) -> str:
    """Canonical JSONL serialization; inverse of parse_graph_json."""
    lines = []
    for g in graphs:
        obj = {
            "words": list(g.words),
            "edges": [{"head": e.head, "dep": e.dep, "label": e.label} for e in g.edges],
            "framework": g.framework.value,
        }
        lines.append(json.dumps(obj, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")


def _incoming_counts(g: WordGraph) -> list[int]:
    counts = [0] * g.n_words
    for e in g.edges:
        counts[e.dep] += 1
    return counts


def _has_directed_cycle(g: WordGraph) -> bool:
    succ: dict[int, list[int]] = {}
    for e in g.edges:
        succ.setdefault(e.head, []).append(e.dep)
    WHITE, GRAY, BLACK = 0, 1, 2
    color = [WHITE] * g.n_words
    for start in range(g.n_words):
        if color[start] != WHITE:
            continue
        stack: list[tuple[int, int]] = [(start, 0)]
        color[start] = GRAY
        while stack:
            node, child_i = stack[-1]
            children = succ.get(node, [])
            if child_i < len(children):
                stack[-1] = (node, child_i + 1)
                child = children[child_i]
                if color[child] == GRAY:
                    return True
                if color[child] == WHITE:
                    color[child] = GRAY
                    stack.append((child, 0))
            else:
                color[node] = BLACK
                stack.pop()
    return False


def _is_connected(g: WordGraph) -> bool:
    if g.n_words <= 1:
        return True
    nbrs: dict[int, set[int]] = {i: set() for i in range(g.n_words)}
    for e in g.edges:
        nbrs[e.head].add(e.dep)
        nbrs[e.dep].add(e.head)
    seen = {0}
    frontier = [0]
    while frontier:
        node = frontier.pop()
        for nxt in nbrs[node]:
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return len(seen) == g.n_words


def validate_graph(g: WordGraph) -> ValidationReport:
    """Check structural properties and report framework-specific violations.

    Tree frameworks (UD, DEP) must be single-headed, free of directed cycles
    and connected; breaking any of these adds a violation.  For DM, SDP and
    GENERIC the same facts are reported without being counted as violations,
    since multiple heads and unattached words are legitimate there.
    """
    incoming = _incoming_counts(g)
    multi_headed = [i for i, c in enumerate(incoming) if c > 1]
    degree = [0] * g.n_words
    for e in g.edges:
        degree[e.head] += 1
        degree[e.dep] += 1
    unattached = [i for i, d in enumerate(degree) if d == 0] if g.n_words > 1 else []

    report = ValidationReport(
        framework=g.framework,
        is_single_headed=not multi_headed,
        is_acyclic=not _has_directed_cycle(g),
        is_connected=_is_connected(g),
        unattached_word_indices=unattached,
    )
    if g.framework in TREE_FRAMEWORKS:
        if multi_headed:
            words = ", ".join(f"{i} ({g.words[i]!r})" for i in multi_headed)
            report.violations.append(f"multi-headed words: {words}")
        if not report.is_acyclic:
            report.violations.append("directed cycle present")
        if not report.is_connected:
            report.violations.append("graph is not connected")
    return report


def to_undirected_untyped(g: WordGraph) -> set[tuple[int, int]]:
    """Collapse directed labeled edges to unordered index pairs.

    Reciprocal edges and label variants of the same pair collapse to a single
    pair; labels and directions are discarded.
    """
    return {(min(e.head, e.dep), max(e.head, e.dep)) for e in g.edges}
