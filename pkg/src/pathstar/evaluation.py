"""Evaluation: exact oracles, the single-edge-lookup reference predictor,
and accuracy reports for trained models.

Teacher-forced evaluation feeds the ground-truth sequence and scores each
next-token prediction in isolation; generative evaluation forces the prefix
only through '=' (plus '#' when a scratchpad is present) and rolls the model
out greedily.  A generated sequence can only be right if every step is
right, which is what separates the two modes on this task.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphs import GraphError, adjacency as build_adjacency
from .tokens import ParseError, TokenizedExample, Vocabulary, parse_example


class AmbiguousSuccessorError(GraphError):
    """A node with several outgoing edges was used for a single-edge lookup."""


def chc_predict(tokens, position: int, vocab: Vocabulary, rng=None):
    """Single-edge lookup: predict tokens[position] from its predecessor.

    Returns the unique graph successor of tokens[position - 1], or None when
    the predecessor is not a node (masked or special) or has no outgoing
    edge.  Several outgoing edges (the start node) are resolved uniformly
    when an rng is supplied and raise otherwise.
    """
    tokens = [int(t) for t in tokens]
    if not 1 <= position < len(tokens):
        raise GraphError(f"position {position} out of range")
    prev = tokens[position - 1]
    if not vocab.is_node(prev):
        return None
    adj, _ = parse_example(tokens, vocab)
    succ = adj.get(prev, [])
    if not succ:
        return None
    if len(succ) == 1:
        return succ[0]
    if rng is None:
        raise AmbiguousSuccessorError(
            f"node {prev} has {len(succ)} successors; lookup is ambiguous"
        )
    return succ[int(rng.integers(len(succ)))]


def solve_path_oracle(tokens, vocab: Vocabulary) -> tuple[int, ...]:
    """Parse a serialized example and walk the unique start-to-target path.

    Fails loudly (GraphError / ParseError) on malformed structure: missing
    query nodes, branching beyond the start, cycles, or an ambiguous or
    unreachable target.
    """
    adj, query = parse_example(tokens, vocab)
    if len(query) < 2:
        raise GraphError("query must expose the start and target")
    s, t = query[0], query[-1]
    if s not in adj:
        raise GraphError(f"start node {s} has no outgoing edges")
    limit = sum(len(v) for v in adj.values()) + 1
    matches = []
    for lead in adj[s]:
        path = [s, lead]
        while path[-1] in adj:
            nxt = adj[path[-1]]
            if len(nxt) > 1:
                raise GraphError(f"node {path[-1]} branches beyond the start")
            path.append(nxt[0])
            if len(path) > limit:
                raise GraphError("cycle detected while walking an arm")
        if path[-1] == t:
            matches.append(tuple(path))
    if not matches:
        raise GraphError(f"no arm terminates at target {t}")
    if len(matches) > 1:
        raise GraphError(f"target {t} terminates {len(matches)} arms")
    return matches[0]


class ChcUniformPredictor:
    """Reference predictor: single-edge lookup where the previous ground-truth
    token determines the next node, and a uniform guess over the start node's
    successors where it does not (the leading node)."""

    def __init__(self, vocab: Vocabulary, rng: np.random.Generator):
        self.vocab = vocab
        self.rng = rng

    def arm_predictions(self, example: TokenizedExample) -> list[int]:
        adj, query = parse_example(example.source_ids, self.vocab)
        arm = example.arm
        preds = [query[0]]  # the answer always opens with the queried start
        for j in range(1, len(arm)):
            prev = arm[j - 1]
            succ = adj.get(prev, [])
            if len(succ) == 1:
                preds.append(succ[0])
            elif len(succ) > 1:
                preds.append(succ[int(self.rng.integers(len(succ)))])
            else:
                preds.append(0)  # no edge to follow; always wrong
        return preds


@dataclass(frozen=True)
class EvalReport:
    """Accuracy summary over one evaluation batch."""

    mode: str
    n: int
    arm_pos_acc: tuple[float, ...]
    arm_seq_acc: float
    sp_pos_acc: tuple[float, ...] | None = None
    sp_seq_acc: float | None = None
    sp_membership: bool = False
    extras: dict = field(default_factory=dict, hash=False)

    @property
    def leading_node_acc(self) -> float:
        return self.arm_pos_acc[1]

    @property
    def seq_acc(self) -> float:
        """Joint sequence accuracy over scratchpad and answer."""
        if self.sp_seq_acc is None:
            return self.arm_seq_acc
        return self.extras.get("joint_seq_acc", min(self.arm_seq_acc, self.sp_seq_acc))

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "n": self.n,
            "arm_pos_acc": list(self.arm_pos_acc),
            "arm_seq_acc": self.arm_seq_acc,
            "sp_pos_acc": None if self.sp_pos_acc is None else list(self.sp_pos_acc),
            "sp_seq_acc": self.sp_seq_acc,
            "sp_membership": self.sp_membership,
            "extras": dict(self.extras),
        }


def _position_accuracy(correct: np.ndarray, lens: np.ndarray) -> tuple[float, ...]:
    width = correct.shape[1]
    valid = np.arange(width)[None, :] < lens[:, None]
    out = []
    for j in range(width):
        col = valid[:, j]
        out.append(float(correct[col, j].mean()) if col.any() else float("nan"))
    return tuple(out)


def _bow_sp_valid_sets(example: TokenizedExample):
    """Per-position admissible token sets for a bag-of-words scratchpad."""
    remaining = set(example.arm)
    sets = [{example.arm[0]}]
    remaining.discard(example.arm[0])
    for tok in example.sp[1:]:
        sets.append(set(remaining))
        remaining.discard(tok)
    return sets


def _score(batch, arm_preds: np.ndarray, sp_preds: np.ndarray | None, mode: str):
    arms = batch.arms
    arm_lens = batch.arm_lens
    correct = arm_preds == arms
    pos_acc = _position_accuracy(correct, arm_lens)
    valid = np.arange(arms.shape[1])[None, :] < arm_lens[:, None]
    arm_seq = (correct | ~valid).all(axis=1)
    report_sp_pos = report_sp_seq = None
    membership = False
    joint = arm_seq
    if sp_preds is not None:
        sp_lens = np.maximum(batch.sp_totals - 1, 0)
        sp_refs = np.zeros_like(sp_preds)
        sp_correct = np.zeros(sp_preds.shape, dtype=bool)
        sp_seq = np.ones(len(batch.examples), dtype=bool)
        for b, ex in enumerate(batch.examples):
            if ex.sp is None:
                continue
            w = len(ex.sp)
            sp_refs[b, :w] = ex.sp
            if getattr(batch, "sp_variant", None) == "bow":
                membership = True
                sets = _bow_sp_valid_sets(ex)
                if mode == "generative":
                    # any emission of the right bag counts, start first
                    gen = list(sp_preds[b, :w])
                    sp_correct[b, :w] = [
                        g in s for g, s in zip(gen, _gen_bow_sets(ex, gen))
                    ]
                else:
                    sp_correct[b, :w] = [
                        int(p) in s for p, s in zip(sp_preds[b, :w], sets)
                    ]
            else:
                sp_correct[b, :w] = sp_preds[b, :w] == sp_refs[b, :w]
            sp_seq[b] = bool(sp_correct[b, :w].all())
        report_sp_pos = _position_accuracy(sp_correct, sp_lens)
        report_sp_seq = float(sp_seq.mean())
        joint = arm_seq & sp_seq
    return EvalReport(
        mode=mode,
        n=len(batch.examples),
        arm_pos_acc=pos_acc,
        arm_seq_acc=float(arm_seq.mean()),
        sp_pos_acc=report_sp_pos,
        sp_seq_acc=report_sp_seq,
        sp_membership=membership,
        extras={"joint_seq_acc": float(joint.mean())},
    )


def _gen_bow_sets(example: TokenizedExample, generated: list):
    """Admissible sets along the model's own bag emission order."""
    remaining = set(example.arm)
    sets = [{example.arm[0]}]
    remaining.discard(example.arm[0])
    for tok in generated[1:]:
        sets.append(set(remaining))
        remaining.discard(int(tok))
    return sets


def _label_positions(batch, offsets, limit):
    """Label-row indices for target tokens at given within-target offsets.

    Rows are clipped into range; out-of-range offsets belong to shorter
    examples and are masked out of the scores anyway.
    """
    base = batch.src_lens[:, None] + offsets
    return np.clip(base - 1, 0, limit - 1)


def teacher_forced_eval(model, batch, rng=None) -> EvalReport:
    """Score next-token predictions under ground-truth forcing.

    ``model`` is either the transformer or a reference predictor exposing
    ``arm_predictions``; batches must be built without input noising.
    """
    B = len(batch.examples)
    m_width = batch.arms.shape[1]
    if hasattr(model, "forward"):
        trace = model.forward(batch.model_input, need_cache=False)
        preds = np.argmax(trace.logits, axis=-1)
        limit = preds.shape[1]
        rows = np.arange(B)[:, None]
        arm_off = batch.sp_totals[:, None] + np.arange(m_width)[None, :]
        arm_preds = preds[rows, _label_positions(batch, arm_off, limit)]
        sp_preds = None
        if batch.sp_totals.max() > 0:
            s_width = int(batch.sp_totals.max()) - 1
            sp_off = 1 + np.arange(s_width)[None, :]
            sp_preds = preds[rows, _label_positions(batch, sp_off, limit)]
        return _score(batch, arm_preds, sp_preds, "teacher_forced")
    if batch.sp_totals.max() > 0:
        raise GraphError("reference predictor scores plain answers only")
    arm_preds = np.zeros((B, m_width), dtype=np.int64)
    for b, ex in enumerate(batch.examples):
        row = model.arm_predictions(ex)
        arm_preds[b, : len(row)] = row
    return _score(batch, arm_preds, None, "teacher_forced")


def greedy_generate(model, prefix: np.ndarray, n_tokens: int) -> np.ndarray:
    """Greedy decoding at temperature one: argmax each step, ties resolved
    to the lowest token id.  The caller fixes the emission count; the eval
    protocol stops at the reference length (never more than 20 beyond it)."""
    prefix = np.asarray(prefix)
    B, P = prefix.shape
    buf = np.zeros((B, P + n_tokens), dtype=prefix.dtype)
    buf[:, :P] = prefix
    for i in range(n_tokens):
        trace = model.forward(buf[:, : P + i], need_cache=False)
        buf[:, P + i] = np.argmax(trace.logits[:, -1, :], axis=-1)
    return buf[:, P:]


def generative_eval(model, batch) -> EvalReport:
    """Roll the model out greedily from the forced prefix and score it."""
    B = len(batch.examples)
    T = batch.full_ids.shape[1]
    m_width = batch.arms.shape[1]
    sp_counts = np.maximum(batch.sp_totals - 1, 0)  # tokens after '#'
    start = batch.src_lens + np.minimum(batch.sp_totals, 1)  # force '#' too
    todo = (sp_counts + batch.arm_lens).astype(np.int64)
    buf = np.array(batch.full_ids)
    for b in range(B):
        buf[b, start[b] :] = 0
    pos = start.astype(np.int64).copy()
    left = todo.copy()
    while left.max() > 0:
        active = left > 0
        t_now = int(pos[active].max())
        trace = model.forward(buf[:, :t_now], need_cache=False)
        rows = np.argmax(
            trace.logits[np.arange(B), np.clip(pos - 1, 0, t_now - 1)], axis=-1
        )
        write = active
        buf[write, pos[write]] = rows[write]
        pos[write] += 1
        left[write] -= 1
    rows_ix = np.arange(B)[:, None]
    arm_start = batch.src_lens + batch.sp_totals
    arm_cols = np.clip(arm_start[:, None] + np.arange(m_width)[None, :], 0, T - 1)
    arm_preds = buf[rows_ix, arm_cols]
    sp_preds = None
    if batch.sp_totals.max() > 0:
        s_width = int(batch.sp_totals.max()) - 1
        sp_cols = np.clip(start[:, None] + np.arange(s_width)[None, :], 0, T - 1)
        sp_preds = buf[rows_ix, sp_cols]
    return _score(batch, arm_preds, sp_preds, "generative")


def solved_rate(seq_accs, threshold: float = 0.95) -> float:
    """Percent of trials strictly above the solve threshold."""
    accs = np.asarray(list(seq_accs), dtype=float)
    return float((accs > threshold).mean() * 100.0)


def above_baseline_rate(seq_accs, d: int) -> float:
    """Percent of trials strictly above chance (1/D) plus ten points."""
    accs = np.asarray(list(seq_accs), dtype=float)
    return float((accs > (1.0 / d + 0.10)).mean() * 100.0)


def aggregate(name: str, d: int, m: int, tf_seq_accs, gen_seq_accs) -> dict:
    """One result-table row aggregated over seeds."""
    return {
        "experiment": name,
        "d": d,
        "m": m,
        "tf_solved": solved_rate(tf_seq_accs),
        "tf_above_baseline": above_baseline_rate(tf_seq_accs, d),
        "gen_solved": solved_rate(gen_seq_accs),
        "gen_above_baseline": above_baseline_rate(gen_seq_accs, d),
    }
