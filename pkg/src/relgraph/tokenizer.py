"""Entity marking and subword tokenization with total word alignment.

The classifier reads entity representations off the opening marker tokens,
so every instance is first rewritten with marker tokens around its subject
and object spans, then split into subwords by greedy longest match against a
fixed vocabulary.  The resulting :class:`MarkedSequence` keeps a total map
between subword positions and original word indices; the graph builder and
the model never re-derive alignment on their own.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import ConfigError, ContractError, ParseError, VocabError

DEFAULT_UNK = "[UNK]"
DEFAULT_PAD = "[PAD]"
DEFAULT_CONTINUATION = "##"

SUBJ_OPEN = "[SUBJ]"
SUBJ_CLOSE = "[/SUBJ]"
OBJ_OPEN = "[OBJ]"
OBJ_CLOSE = "[/OBJ]"
DEFAULT_MARKERS = (SUBJ_OPEN, SUBJ_CLOSE, OBJ_OPEN, OBJ_CLOSE)

DEFAULT_MAX_LEN = 256


class MarkerScheme(str, Enum):
    ENTITY = "entity"
    TYPED = "typed"


def typed_markers(subj_type: str, obj_type: str) -> tuple[str, str, str, str]:
    """Marker surface strings for the typed scheme, types upper-cased."""
    st, ot = subj_type.upper(), obj_type.upper()
    return (
        f"[SUBJ-{st}]",
        f"[/SUBJ-{st}]",
        f"[OBJ-{ot}]",
        f"[/OBJ-{ot}]",
    )


@dataclass(frozen=True)
class RcInstance:
    """One relation classification example over pre-tokenized words."""

    instance_id: str
    tokens: tuple[str, ...]
    subj_span: tuple[int, int]
    obj_span: tuple[int, int]
    relation: str
    subj_type: str | None = None
    obj_type: str | None = None

    def __post_init__(self) -> None:
        n = len(self.tokens)
        for name, (s, e) in (("subj", self.subj_span), ("obj", self.obj_span)):
            if not (0 <= s < e <= n):
                raise ContractError(
                    f"instance {self.instance_id}: {name} span [{s}, {e}) invalid "
                    f"for {n} tokens"
                )
        if self.subj_span != self.obj_span:
            s1, e1 = self.subj_span
            s2, e2 = self.obj_span
            if not (e1 <= s2 or e2 <= s1):
                raise ContractError(
                    f"instance {self.instance_id}: spans {self.subj_span} and "
                    f"{self.obj_span} partially overlap"
                )


_INSTANCE_FIELDS = frozenset(
    {"id", "tokens", "subj", "obj", "subj_type", "obj_type", "relation"}
)


def parse_instances(text: str) -> list[RcInstance]:
    """Parse the instance JSONL schema into RcInstance objects."""
    out: list[RcInstance] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {lineno}: invalid JSON: {exc}") from exc
        if not isinstance(obj, dict) or set(obj.keys()) != _INSTANCE_FIELDS:
            raise ParseError(
                f"line {lineno}: instance object needs exactly the fields "
                f"{sorted(_INSTANCE_FIELDS)}"
            )
        try:
            out.append(
                RcInstance(
                    instance_id=str(obj["id"]),
                    tokens=tuple(obj["tokens"]),
                    subj_span=(int(obj["subj"][0]), int(obj["subj"][1])),
                    obj_span=(int(obj["obj"][0]), int(obj["obj"][1])),
                    relation=str(obj["relation"]),
                    subj_type=obj["subj_type"],
                    obj_type=obj["obj_type"],
                )
            )
        except ContractError as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
    return out


def instances_to_jsonl(instances: list[RcInstance]) -> str:
    lines = []
    for inst in instances:
        obj = {
            "id": inst.instance_id,
            "tokens": list(inst.tokens),
            "subj": list(inst.subj_span),
            "obj": list(inst.obj_span),
            "subj_type": inst.subj_type,
            "obj_type": inst.obj_type,
            "relation": inst.relation,
        }
        lines.append(json.dumps(obj, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")


class Vocab:
    """Immutable subword vocabulary; ids are positions in the entry list."""

    def __init__(
        self,
        entries: list[str],
        continuation_prefix: str = DEFAULT_CONTINUATION,
        unk_token: str = DEFAULT_UNK,
        pad_token: str = DEFAULT_PAD,
        special_tokens: tuple[str, ...] = DEFAULT_MARKERS,
    ) -> None:
        entries = list(entries)
        for required in (unk_token, pad_token, *special_tokens):
            if required not in entries:
                entries.append(required)
        ids: dict[str, int] = {}
        for i, piece in enumerate(entries):
            if piece in ids:
                raise VocabError(f"duplicate vocabulary entry {piece!r}")
            ids[piece] = i
        self.entries: tuple[str, ...] = tuple(entries)
        self._ids = ids
        self.continuation_prefix = continuation_prefix
        self.unk_token = unk_token
        self.pad_token = pad_token
        self.special_tokens = tuple(special_tokens)
        self.unk_id = ids[unk_token]
        self.pad_id = ids[pad_token]
        self._max_piece_len = max(len(p) for p in entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, piece: str) -> bool:
        return piece in self._ids

    def id_of(self, piece: str) -> int:
        try:
            return self._ids[piece]
        except KeyError:
            raise VocabError(f"piece {piece!r} not in vocabulary") from None

    def to_text(self) -> str:
        return "\n".join(self.entries) + "\n"


def load_vocab(
    path: str | Path,
    continuation_prefix: str = DEFAULT_CONTINUATION,
    unk_token: str = DEFAULT_UNK,
    pad_token: str = DEFAULT_PAD,
    special_tokens: tuple[str, ...] = DEFAULT_MARKERS,
) -> Vocab:
    """Load a one-piece-per-line vocabulary file.

    Line order fixes the id order; unk, pad and any missing special tokens
    are appended at the end so ids of file entries are stable.
    """
    text = Path(path).read_text(encoding="utf-8")
    entries: list[str] = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        piece = line.rstrip("\n")
        if piece == "":
            continue
        if piece in seen:
            raise VocabError(
                f"{path}: line {lineno}: duplicate entry {piece!r} "
                f"(first seen on line {seen[piece]})"
            )
        seen[piece] = lineno
        entries.append(piece)
    if not entries:
        raise VocabError(f"{path}: vocabulary file is empty")
    return Vocab(entries, continuation_prefix, unk_token, pad_token, special_tokens)


@dataclass(frozen=True)
class MarkedTokens:
    """Word sequence with marker tokens inserted around both entity spans.

    ``word_origin[i]`` is the original word index of token i, or None when
    token i is a marker.  Spans cover their own markers.
    """

    tokens: tuple[str, ...]
    word_origin: tuple[int | None, ...]
    subj_span: tuple[int, int]
    obj_span: tuple[int, int]
    instance_id: str = ""


def insert_markers(inst: RcInstance, scheme: MarkerScheme) -> MarkedTokens:
    """Wrap the subject and object spans in marker tokens.

    With identical spans the subject markers wrap outside the object markers.
    The typed scheme requires both entity types.
    """
    if scheme is MarkerScheme.TYPED:
        if inst.subj_type is None or inst.obj_type is None:
            raise ConfigError(
                f"instance {inst.instance_id}: typed entity markers require "
                f"subj_type and obj_type"
            )
        s_open, s_close, o_open, o_close = typed_markers(inst.subj_type, inst.obj_type)
    else:
        s_open, s_close, o_open, o_close = DEFAULT_MARKERS

    # before[i]: markers inserted before word i; after[i]: inserted after
    # word i-1 boundary handled by using end positions in "before" terms.
    n = len(inst.tokens)
    opens: dict[int, list[str]] = {}
    closes: dict[int, list[str]] = {}
    ss, se = inst.subj_span
    os_, oe = inst.obj_span
    if inst.subj_span == inst.obj_span:
        opens.setdefault(ss, []).extend([s_open, o_open])
        closes.setdefault(se, []).extend([o_close, s_close])
    else:
        opens.setdefault(ss, []).append(s_open)
        closes.setdefault(se, []).append(s_close)
        opens.setdefault(os_, []).append(o_open)
        closes.setdefault(oe, []).append(o_close)

    tokens: list[str] = []
    origin: list[int | None] = []
    positions: dict[str, int] = {}
    for i in range(n + 1):
        for marker in closes.get(i, []):
            positions[marker] = len(tokens)
            tokens.append(marker)
            origin.append(None)
        for marker in opens.get(i, []):
            positions[marker] = len(tokens)
            tokens.append(marker)
            origin.append(None)
        if i < n:
            tokens.append(inst.tokens[i])
            origin.append(i)

    subj_span = (positions[s_open], positions[s_close] + 1)
    obj_span = (positions[o_open], positions[o_close] + 1)
    return MarkedTokens(
        tokens=tuple(tokens),
        word_origin=tuple(origin),
        subj_span=subj_span,
        obj_span=obj_span,
        instance_id=inst.instance_id,
    )


@dataclass(frozen=True)
class MarkedSequence:
    """Subword view of a marked token sequence with total word alignment.

    ``word_of_subword[p]`` is the original word index of subword p, or None
    for marker subwords.  ``first_subword_of_word[w]`` is the first subword
    position of word w, or None when truncation dropped the word entirely.
    Anchors point at the opening markers; closes at the closing markers.
    """

    subword_ids: tuple[int, ...]
    surface: tuple[str, ...]
    word_of_subword: tuple[int | None, ...]
    first_subword_of_word: tuple[int | None, ...]
    subword_positions_of_word: tuple[tuple[int, ...], ...]
    subj_anchor: int
    subj_close: int
    obj_anchor: int
    obj_close: int
    subj_words: tuple[int, ...]
    obj_words: tuple[int, ...]
    n_words_total: int
    instance_id: str = ""

    @property
    def n(self) -> int:
        return len(self.subword_ids)


class InstanceRejected(ContractError):
    """Truncation would drop a marker token; the instance cannot be used."""


def _split_word(word: str, vocab: Vocab) -> list[str]:
    """Greedy longest-match split; an unmatchable remainder becomes unk."""
    if word == "":
        return [vocab.unk_token]
    pieces: list[str] = []
    start = 0
    prefix = vocab.continuation_prefix
    while start < len(word):
        lookup_prefix = "" if start == 0 else prefix
        end = min(len(word), start + vocab._max_piece_len)
        match = None
        while end > start:
            candidate = lookup_prefix + word[start:end]
            if candidate in vocab:
                match = candidate
                break
            end -= 1
        if match is None:
            pieces.append(vocab.unk_token)
            break
        pieces.append(match)
        start = end
    return pieces


def tokenize(
    marked: MarkedTokens, vocab: Vocab, max_len: int = DEFAULT_MAX_LEN
) -> MarkedSequence:
    """Tokenize a marked word sequence into an aligned subword sequence.

    Markers map to their dedicated single ids.  Sequences longer than
    ``max_len`` are truncated only when all four marker subwords survive;
    otherwise the instance is rejected.
    """
    if not marked.tokens:
        raise ContractError("cannot tokenize an empty token sequence")
    surface: list[str] = []
    ids: list[int] = []
    word_of: list[int | None] = []
    token_start: list[int] = []
    n_words = sum(1 for o in marked.word_origin if o is not None)
    for token, origin in zip(marked.tokens, marked.word_origin):
        token_start.append(len(surface))
        if origin is None:
            if token not in vocab:
                raise VocabError(
                    f"marker token {token!r} missing from vocabulary; pass it "
                    f"via special_tokens when loading the vocab"
                )
            surface.append(token)
            ids.append(vocab.id_of(token))
            word_of.append(None)
        else:
            for piece in _split_word(token, vocab):
                surface.append(piece)
                ids.append(vocab.id_of(piece))
                word_of.append(origin)

    subj_anchor = token_start[marked.subj_span[0]]
    subj_close = token_start[marked.subj_span[1] - 1]
    obj_anchor = token_start[marked.obj_span[0]]
    obj_close = token_start[marked.obj_span[1] - 1]

    if len(ids) > max_len:
        if max(subj_anchor, subj_close, obj_anchor, obj_close) >= max_len:
            raise InstanceRejected(
                f"instance {marked.instance_id}: truncation to {max_len} "
                f"subwords would drop an entity marker"
            )
        surface = surface[:max_len]
        ids = ids[:max_len]
        word_of = word_of[:max_len]

    first: list[int | None] = [None] * n_words
    positions: list[list[int]] = [[] for _ in range(n_words)]
    for p, w in enumerate(word_of):
        if w is not None:
            positions[w].append(p)
            if first[w] is None:
                first[w] = p

    subj_words = tuple(
        o
        for o in marked.word_origin[marked.subj_span[0] : marked.subj_span[1]]
        if o is not None
    )
    obj_words = tuple(
        o
        for o in marked.word_origin[marked.obj_span[0] : marked.obj_span[1]]
        if o is not None
    )
    return MarkedSequence(
        subword_ids=tuple(ids),
        surface=tuple(surface),
        word_of_subword=tuple(word_of),
        first_subword_of_word=tuple(first),
        subword_positions_of_word=tuple(tuple(p) for p in positions),
        subj_anchor=subj_anchor,
        subj_close=subj_close,
        obj_anchor=obj_anchor,
        obj_close=obj_close,
        subj_words=subj_words,
        obj_words=obj_words,
        n_words_total=n_words,
        instance_id=marked.instance_id,
    )
