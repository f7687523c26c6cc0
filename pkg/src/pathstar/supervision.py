"""Supervision shaping: input noising plans, scratchpads, and auxiliary
target distributions.

All masking operates on what the model *sees* as teacher-forced input; the
prediction labels are never altered.  Plans are sampled per example and are
plain data so datasets stay reproducible and auditable.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .graphs import GraphError, PathStarGraph, StarTree, _traversal_steps
from .tokens import Vocabulary

KEEP, DROP, REPLACE = 0, 1, 2
NOISE_KINDS = ("dropout", "replace", "mixed")

SCRATCHPAD_VARIANTS = (
    "reverse",
    "sorted_arm",
    "bow",
    "forward",
    "recon_lt_by_l",
    "recon_lt_by_t",
    "recon_tl_by_l",
    "recon_tl_by_t",
)


@dataclass(frozen=True)
class MaskPlan:
    """Per-position input actions: keep, drop to the mask token, or replace
    with a sampled node id (held in ``replacements``)."""

    actions: tuple[int, ...]
    replacements: tuple[int, ...]

    def __post_init__(self):
        if len(self.actions) != len(self.replacements):
            raise GraphError("plan arrays must align")
        for a, r in zip(self.actions, self.replacements):
            if a not in (KEEP, DROP, REPLACE):
                raise GraphError(f"unknown action {a}")
            if (a == REPLACE) != (r != 0):
                raise GraphError("replacement ids exactly on replace positions")

    @property
    def masked_fraction(self) -> float:
        if not self.actions:
            return 0.0
        return sum(a != KEEP for a in self.actions) / len(self.actions)


def keep_plan(length: int) -> MaskPlan:
    return MaskPlan((KEEP,) * length, (0,) * length)


def _noise_actions(
    masked: np.ndarray, noise: str, vocab_size: int | None, rng: np.random.Generator
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    if noise not in NOISE_KINDS:
        raise GraphError(f"unknown noise kind {noise!r}")
    n = masked.shape[0]
    actions = np.where(masked, DROP, KEEP)
    if noise != "dropout":
        if vocab_size is None:
            raise GraphError("replacement noise needs the node universe size")
        replace = masked.copy()
        if noise == "mixed":
            replace &= rng.random(n) < 0.5  # half drop, half replace
        actions[replace] = REPLACE
        ids = np.where(replace, rng.integers(1, vocab_size + 1, size=n), 0)
    else:
        ids = np.zeros(n, dtype=int)
    return tuple(int(a) for a in actions), tuple(int(r) for r in ids)


def sample_uniform_mask(
    target_len: int,
    rate: float,
    rng: np.random.Generator,
    noise: str = "dropout",
    scheme: str = "bernoulli",
    vocab_size: int | None = None,
    keep_first: bool = False,
) -> MaskPlan:
    """Mask each position independently with probability ``rate``.

    ``scheme="count_choose"`` instead masks exactly round(rate * n) positions
    chosen without replacement.  ``keep_first`` pins position 0 to keep and
    restricts the random pattern to the rest, matching the convention that
    the answer's start node is never noised.
    """
    if not 0.0 <= rate <= 1.0:
        raise GraphError(f"rate {rate} outside [0, 1]")
    offset = 1 if keep_first else 0
    n = target_len - offset
    if n < 0:
        raise GraphError("target too short for the plan")
    if scheme == "bernoulli":
        masked = rng.random(n) < rate
    elif scheme == "count_choose":
        k = int(round(rate * n))
        masked = np.zeros(n, dtype=bool)
        if k:
            masked[rng.choice(n, size=k, replace=False)] = True
    else:
        raise GraphError(f"unknown scheme {scheme!r}")
    actions, ids = _noise_actions(masked, noise, vocab_size, rng)
    return MaskPlan((KEEP,) * offset + actions, (0,) * offset + ids)


def span_length(p: float, rng: np.random.Generator) -> int:
    """Geometric span length on {1, 2, ...} with mean 1/p."""
    return int(rng.geometric(p))


def sample_span_plan(
    target_len: int,
    p_mask: float,
    p_keep: float,
    rng: np.random.Generator,
    noise: str = "dropout",
    vocab_size: int | None = None,
    keep_first: bool = False,
) -> MaskPlan:
    """Alternate masked and kept spans with geometric lengths.

    Span lengths are drawn from geometric distributions with success
    probabilities ``p_mask`` and ``p_keep`` (means 1/p); whether the first
    span masks or keeps is a fair coin.  The final span is truncated at the
    target boundary.
    """
    for name, p in (("p_mask", p_mask), ("p_keep", p_keep)):
        if not 0.0 < p <= 1.0:
            raise GraphError(f"{name} {p} outside (0, 1]")
    offset = 1 if keep_first else 0
    n = target_len - offset
    if n < 0:
        raise GraphError("target too short for the plan")
    masked = np.zeros(n, dtype=bool)
    masking = bool(rng.random() < 0.5)  # randomize the first span's type
    pos = 0
    while pos < n:
        length = span_length(p_mask if masking else p_keep, rng)
        if masking:
            masked[pos : pos + length] = True
        pos += length
        masking = not masking
    actions, ids = _noise_actions(masked, noise, vocab_size, rng)
    return MaskPlan((KEEP,) * offset + actions, (0,) * offset + ids)


def apply_mask_plan(ids, plan: MaskPlan, vocab: Vocabulary) -> tuple[int, ...]:
    """Apply a plan to a token segment, returning the noised input stream."""
    ids = tuple(int(t) for t in ids)
    if len(ids) != len(plan.actions):
        raise GraphError("plan length must match the segment")
    out = []
    for t, a, r in zip(ids, plan.actions, plan.replacements):
        if a == KEEP:
            out.append(t)
        elif a == DROP:
            out.append(vocab.mask_id)
        else:
            out.append(r)
    return tuple(out)


@dataclass(frozen=True)
class ScratchpadPlan:
    """Scratchpad content for one example.

    ``tokens`` is the sequence serialized after '#'.  ``step_targets``, when
    set, gives per-position weighted target sets (bag-of-words pads have no
    single correct order); otherwise the tokens themselves are the labels.
    ``mask_plan`` is the input-noising plan for the scratchpad segment
    (forward-copy variant only).
    """

    variant: str
    tokens: tuple[int, ...]
    step_targets: tuple[tuple[tuple[int, float], ...], ...] | None = None
    mask_plan: MaskPlan | None = None


def build_scratchpad(
    graph: PathStarGraph,
    variant: str,
    rng: np.random.Generator | None = None,
    p_mask: float = 0.5,
    p_keep: float = 0.8,
) -> ScratchpadPlan:
    """Build the scratchpad segment for a path-star instance.

    reverse writes the answer arm backwards; sorted_arm writes it in
    ascending node-id order; bow writes the start node then the remaining
    arm nodes in a random order, supervised per position by the set of
    not-yet-emitted nodes; forward writes the arm itself but noises the
    scratchpad input with replacement-span masking; the recon variants write
    the (leading, terminal) node pairs of every arm, in either orientation,
    sorted by either member.
    """
    if variant not in SCRATCHPAD_VARIANTS:
        raise GraphError(f"unknown scratchpad variant {variant!r}")
    arm = tuple(graph.target_arm)
    if variant == "reverse":
        return ScratchpadPlan(variant, arm[::-1])
    if variant == "sorted_arm":
        return ScratchpadPlan(variant, tuple(sorted(arm)))
    if variant == "bow":
        if rng is None:
            raise GraphError("bow scratchpad needs an rng")
        rest = list(arm[1:])
        order = [rest[i] for i in rng.permutation(len(rest))]
        tokens = (arm[0],) + tuple(order)
        remaining = set(arm)
        targets = [((arm[0], 1.0),)]
        remaining.discard(arm[0])
        for tok in order:
            w = 1.0 / len(remaining)
            targets.append(tuple((t, w) for t in sorted(remaining)))
            remaining.discard(tok)
        return ScratchpadPlan(variant, tokens, step_targets=tuple(targets))
    if variant == "forward":
        if rng is None:
            raise GraphError("forward scratchpad needs an rng")
        plan = sample_span_plan(
            len(arm),
            p_mask,
            p_keep,
            rng,
            noise="replace",
            vocab_size=graph.node_universe_size,
            keep_first=True,
        )
        return ScratchpadPlan(variant, arm, mask_plan=plan)
    # Graph-reconstruction variants: one (leading, terminal) pair per arm.
    pairs = [(a[1], a[-1]) for a in graph.arms]
    sort_on = 0 if variant.endswith("by_l") else 1
    pairs.sort(key=lambda p: p[sort_on])
    if variant.startswith("recon_tl"):
        pairs = [(t, l) for l, t in pairs]
    return ScratchpadPlan(variant, tuple(x for pair in pairs for x in pair))


@dataclass(frozen=True)
class TreeSmoothingTargets:
    """Per-step weighted next-node sets along a tree traversal.

    Entry p supervises the prediction of ``traversal[p + 1]``: uniform over
    the children of the deepest open node, withholding the target-bearing
    child until its siblings are exhausted.
    """

    traversal: tuple[int, ...]
    step_targets: tuple[tuple[tuple[int, float], ...], ...]


def build_tree_targets(tree: StarTree) -> TreeSmoothingTargets:
    steps = list(_traversal_steps(tree, tree.traversal))
    targets = []
    for valid in steps[:-1]:
        w = 1.0 / len(valid)
        targets.append(tuple((t, w) for t in sorted(valid)))
    if steps[-1] != set():
        raise GraphError("stored traversal does not exhaust the subtree")
    return TreeSmoothingTargets(tuple(tree.traversal), tuple(targets))


def ls_weights(count: int, temperature: float | None = None) -> tuple[float, ...]:
    """Stepped label-smoothing weights over ``count`` future tokens.

    Raw weights count, count-1, ..., 1 favor the nearest future token;
    consecutive weights differ by a constant and the total is 1.  A
    temperature reshapes the raw weights (tau=1 is the identity); it is off
    by default.
    """
    raw = np.arange(count, 0, -1, dtype=float)
    if temperature is not None:
        raw = raw ** (1.0 / temperature)
    return tuple(raw / raw.sum())


@dataclass(frozen=True)
class AuxTargets:
    """Targets for an auxiliary score head at each answer step.

    bow and ls supervise a distribution over the step's future arm set
    {x_i..x_M} (uniform vs. linearly decaying).  ritf carries the rank
    constraints instead: ``intra_triples`` holds (i, j, k) arm-position
    triples (1-based, j >= i, k > j) asking sigma_i to rank x_j above x_k,
    and the inner constraints ask every arm node to outrank every non-arm
    node at every step.
    """

    kind: str
    arm: tuple[int, ...]
    vocab_size: int
    step_targets: tuple[tuple[tuple[int, float], ...], ...] | None = None
    intra_triples: tuple[tuple[int, int, int], ...] | None = None

    @property
    def non_arm_nodes(self) -> tuple[int, ...]:
        members = set(self.arm)
        return tuple(n for n in range(1, self.vocab_size + 1) if n not in members)

    @property
    def intra_pair_count(self) -> int:
        m = len(self.arm)
        return m * (m - 1) // 2

    @property
    def inner_pair_count(self) -> int:
        m = len(self.arm)
        return m * m * (self.vocab_size - m)


AUX_KINDS = ("bow", "ls", "ritf")


def build_aux_targets(
    arm,
    vocab_size: int,
    kind: str,
    temperature: float | None = None,
) -> AuxTargets:
    arm = tuple(int(t) for t in arm)
    m = len(arm)
    if kind not in AUX_KINDS:
        raise GraphError(f"unknown aux kind {kind!r}")
    if kind == "ritf":
        triples = tuple(
            (i, j, k)
            for i in range(1, m + 1)
            for j in range(i, m + 1)
            for k in range(j + 1, m + 1)
        )
        return AuxTargets(kind, arm, vocab_size, intra_triples=triples)
    targets = []
    for i in range(m):
        future = arm[i:]
        if kind == "bow":
            w = 1.0 / len(future)
            targets.append(tuple((t, w) for t in future))
        else:
            weights = ls_weights(len(future), temperature)
            targets.append(tuple(zip(future, weights)))
    return AuxTargets(kind, arm, vocab_size, step_targets=tuple(targets))


@lru_cache(maxsize=32)
def _intra_mask(m: int) -> np.ndarray:
    # mask[i, j, k] true when positions (0-based) satisfy i <= j < k
    i, j, k = np.ogrid[:m, :m, :m]
    return (j >= i) & (k > j)


def ritf_loss_batch(
    scores: np.ndarray,
    arms: np.ndarray,
    vocab_size: int,
    hinge: float = 1.0,
):
    """Summed rank hinge loss and its gradient for a batch of score rows.

    ``scores`` is [B, M, W] with one row per answer step over the full token
    space; ``arms`` is [B, M] of node ids.  Terms activate strictly inside
    the margin, so the boundary subgradient is zero.  Returns (loss, grad)
    with the loss summed over examples and constraints.
    """
    B, S, W = scores.shape
    M = arms.shape[1]
    if S != M:
        raise GraphError("one score row per answer step required")
    idx = np.broadcast_to(arms[:, None, :], (B, M, M))
    ats = np.take_along_axis(scores, idx, axis=2)  # [b, i, j] = sigma_i[x_j]

    tri = _intra_mask(M)
    diff = ats[:, :, :, None] - ats[:, :, None, :]
    act = (diff < hinge) & tri
    loss = float(((hinge - diff) * act).sum())
    g_ats = act.sum(3).astype(scores.dtype) * -1.0
    g_ats += act.sum(2).astype(scores.dtype)

    node_scores = scores[:, :, 1 : vocab_size + 1]
    member = np.zeros((B, vocab_size + 1), dtype=bool)
    member[np.arange(B)[:, None], arms] = True
    non_arm = ~member[:, 1:]
    diff2 = ats[:, :, :, None] - node_scores[:, :, None, :]
    act2 = (diff2 < hinge) & non_arm[:, None, None, :]
    loss += float(((hinge - diff2) * act2).sum())
    g_ats -= act2.sum(3).astype(scores.dtype)

    grad = np.zeros_like(scores)
    grad[:, :, 1 : vocab_size + 1] += act2.sum(2).astype(scores.dtype)
    b_ix = np.arange(B)[:, None, None]
    i_ix = np.arange(M)[None, :, None]
    # arm tokens are distinct within an example, so no index collides
    grad[b_ix, i_ix, idx] += g_ats
    return loss, grad


def ritf_loss(scores: np.ndarray, targets: AuxTargets, hinge: float = 1.0):
    """Single-example wrapper over ritf_loss_batch."""
    if targets.kind != "ritf":
        raise GraphError("targets must be ritf")
    arms = np.array([targets.arm])
    loss, grad = ritf_loss_batch(
        scores[None, :, :], arms, targets.vocab_size, hinge
    )
    return loss, grad[0]
