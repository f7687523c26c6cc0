"""Token-level representation of task instances.

A serialized example is ``source + target``.  With the query leading (the
default) the source reads

    / s t ? u1 v1 | u2 v2 | ... uE vE | =

and the target is the answer arm, optionally preceded by ``#`` and a
scratchpad segment.  Node ids map to token ids identically (node n is token
n); special tokens occupy the ids just above the node universe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import GraphError, PathStarGraph, StarTree


class ParseError(ValueError):
    def __init__(self, message: str, index: int | None = None):
        if index is not None:
            message = f"{message} (at token index {index})"
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class Vocabulary:
    """Fixed token id layout over a node universe of ``vocab_size`` ids."""

    vocab_size: int

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def query_open_id(self) -> int:  # '/'
        return self.vocab_size + 1

    @property
    def query_close_id(self) -> int:  # '?'
        return self.vocab_size + 2

    @property
    def edge_sep_id(self) -> int:  # '|'
        return self.vocab_size + 3

    @property
    def answer_id(self) -> int:  # '='
        return self.vocab_size + 4

    @property
    def sp_open_id(self) -> int:  # '#'
        return self.vocab_size + 5

    @property
    def mask_id(self) -> int:
        return self.vocab_size + 6

    @property
    def total_size(self) -> int:
        return self.vocab_size + 7

    def is_node(self, token: int) -> bool:
        return 1 <= token <= self.vocab_size

    def decode(self, ids) -> list[str]:
        glyphs = {
            self.pad_id: "_",
            self.query_open_id: "/",
            self.query_close_id: "?",
            self.edge_sep_id: "|",
            self.answer_id: "=",
            self.sp_open_id: "#",
            self.mask_id: "<m>",
        }
        return [glyphs.get(int(t), str(int(t))) for t in ids]

    def encode(self, symbols) -> tuple[int, ...]:
        glyphs = {
            "_": self.pad_id,
            "/": self.query_open_id,
            "?": self.query_close_id,
            "|": self.edge_sep_id,
            "=": self.answer_id,
            "#": self.sp_open_id,
            "<m>": self.mask_id,
        }
        out = []
        for s in str(symbols).split() if isinstance(symbols, str) else symbols:
            out.append(glyphs[s] if s in glyphs else int(s))
        return tuple(out)


QUERY_MODES = ("standard", "subset", "general_single_target")


@dataclass(frozen=True)
class Query:
    """Query block content: the start node plus the observed nodes, padded to
    ``width`` tokens at serialization time."""

    mode: str
    nodes: tuple[int, ...]
    width: int


def build_query(
    graph: PathStarGraph | StarTree,
    mode: str = "standard",
    rng: np.random.Generator | None = None,
    eval_time: bool = False,
) -> Query:
    """Build the query block for an instance.

    standard exposes (s, t) in a width-2 block.  subset exposes s plus a
    nonempty random subset of the answer arm (random order); general_single_target
    exposes s plus one uniformly chosen arm node.  Both widen the block to M
    so t's position carries no signal, and at evaluation time both fall back
    to s plus t alone, still padded to width M.
    """
    if mode not in QUERY_MODES:
        raise GraphError(f"unknown query mode {mode!r}")
    s = graph.start
    arm = graph.target_arm
    m = len(arm)
    if mode == "standard":
        return Query(mode, (s, arm[-1]), 2)
    if isinstance(graph, StarTree):
        raise GraphError("trees use the standard query only")
    if eval_time:
        return Query(mode, (s, arm[-1]), m)
    if rng is None:
        raise GraphError(f"query mode {mode!r} needs an rng at training time")
    interior = np.array(arm[1:])
    if mode == "subset":
        k = int(rng.integers(1, m))
        picked = rng.choice(interior, size=k, replace=False)
        return Query(mode, (s,) + tuple(int(x) for x in picked), m)
    node = int(interior[rng.integers(m - 1)])
    return Query(mode, (s, node), m)


@dataclass(frozen=True)
class TokenizedExample:
    """Serialized instance: token ids plus per-token segment tags.

    ``segment_tags`` covers source followed by target with values in
    {"query", "edge", "eog", "sp", "arm"}.  ``arm`` is the ground-truth
    answer sequence (node ids, which equal token ids); ``sp`` is the
    scratchpad token sequence without its leading '#', or None.
    """

    source_ids: tuple[int, ...]
    target_ids: tuple[int, ...]
    segment_tags: tuple[str, ...]
    arm: tuple[int, ...]
    sp: tuple[int, ...] | None = None

    @property
    def sp_total(self) -> int:
        """Target tokens before the answer arm ('#' plus scratchpad)."""
        return 0 if self.sp is None else 1 + len(self.sp)

    def full_ids(self) -> tuple[int, ...]:
        return self.source_ids + self.target_ids


def tokenize(
    graph: PathStarGraph | StarTree,
    edges,
    query: Query,
    vocab: Vocabulary,
    scratchpad: tuple[int, ...] | None = None,
    layout: str = "q_before_g",
) -> TokenizedExample:
    """Serialize an instance to token ids.

    ``edges`` is an EdgeList (or any iterable of (u, v) pairs) in final
    presentation order; ``scratchpad`` is the raw scratchpad token sequence,
    serialized behind '#'.
    """
    if layout not in ("q_before_g", "q_after_g"):
        raise GraphError(f"unknown layout {layout!r}")
    edge_pairs = list(getattr(edges, "edges", edges))
    if len(query.nodes) > query.width:
        raise GraphError("query block narrower than its node list")
    qb = list(query.nodes) + [vocab.pad_id] * (query.width - len(query.nodes))
    query_part = [vocab.query_open_id] + qb + [vocab.query_close_id]
    edge_part = []
    for u, v in edge_pairs:
        edge_part += [u, v, vocab.edge_sep_id]
    if layout == "q_before_g":
        source = query_part + edge_part + [vocab.answer_id]
        tags = ["query"] * len(query_part) + ["edge"] * len(edge_part) + ["eog"]
    else:
        source = edge_part + query_part + [vocab.answer_id]
        tags = ["edge"] * len(edge_part) + ["query"] * len(query_part) + ["eog"]
    arm = tuple(graph.target_arm)
    target = []
    if scratchpad is not None:
        target = [vocab.sp_open_id] + list(scratchpad)
        tags += ["sp"] * len(target)
    target += list(arm)
    tags += ["arm"] * len(arm)
    return TokenizedExample(
        source_ids=tuple(source),
        target_ids=tuple(target),
        segment_tags=tuple(tags),
        arm=arm,
        sp=None if scratchpad is None else tuple(scratchpad),
    )


def _parse_edges(tokens, vocab: Vocabulary, lo: int, hi: int) -> dict[int, list[int]]:
    adjacency: dict[int, list[int]] = {}
    seen: set[tuple[int, int]] = set()
    i = lo
    while i < hi:
        if hi - i < 3:
            raise ParseError("truncated edge triple", i)
        u, v, sep = tokens[i], tokens[i + 1], tokens[i + 2]
        if not vocab.is_node(u):
            raise ParseError(f"expected a node id, got {u}", i)
        if not vocab.is_node(v):
            raise ParseError(f"expected a node id, got {v}", i + 1)
        if sep != vocab.edge_sep_id:
            raise ParseError("expected an edge separator", i + 2)
        if (u, v) in seen:
            raise ParseError(f"duplicate edge ({u}, {v})", i)
        seen.add((u, v))
        adjacency.setdefault(u, []).append(v)
        i += 3
    return adjacency


def parse_example(tokens, vocab: Vocabulary):
    """Recover (adjacency, query nodes) from a serialized example.

    Accepts a bare source or a full source+target sequence; anything after
    '=' is ignored.  Malformed structure raises ParseError with the
    offending index.
    """
    tokens = [int(t) for t in tokens]
    if not tokens:
        raise ParseError("empty sequence")
    try:
        close = tokens.index(vocab.query_close_id)
    except ValueError:
        raise ParseError("no query terminator") from None
    try:
        answer = tokens.index(vocab.answer_id)
    except ValueError:
        raise ParseError("no answer marker") from None

    if tokens[0] == vocab.query_open_id:
        open_idx = 0
        edge_lo, edge_hi = close + 1, answer
    else:
        if close != answer - 1:
            raise ParseError("query must directly precede the answer marker", close)
        try:
            open_idx = tokens.index(vocab.query_open_id)
        except ValueError:
            raise ParseError("no query opener") from None
        edge_lo, edge_hi = 0, open_idx
    if tokens[open_idx] != vocab.query_open_id:
        raise ParseError("expected query opener", open_idx)
    if close <= open_idx:
        raise ParseError("query terminator precedes opener", close)

    qb = tokens[open_idx + 1 : close]
    query = []
    seen_pad = False
    for off, t in enumerate(qb):
        if t == vocab.pad_id:
            seen_pad = True
            continue
        if seen_pad:
            raise ParseError("query node after padding", open_idx + 1 + off)
        if not vocab.is_node(t):
            raise ParseError(f"query holds non-node token {t}", open_idx + 1 + off)
        query.append(t)
    if not query:
        raise ParseError("empty query block", open_idx + 1)

    adjacency = _parse_edges(tokens, vocab, edge_lo, edge_hi)
    return adjacency, tuple(query)
