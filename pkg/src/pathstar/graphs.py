"""Star-shaped graph samplers and edge-list shuffles.

A path-star graph is a set of D disjoint paths ("arms") of M nodes each that
share a single start node s.  The task instance is the graph plus a query
(s, t) where t is the final node of one arm; the answer is that arm, written
from s to t.  Tree-star variants replace each arm with a small tree grown over
the same node budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Branch-count distribution for the d-ary tree variant: probability of a node
# having 1, 2, 3 or 4 children.  Cumulative thresholds keep sampling cheap.
DARY_BRANCH_PROBS = (0.3, 0.4, 0.2, 0.1)
_DARY_CUM = (0.3, 0.7, 0.9, 1.0)

# Probability of splitting (vs. extending the spine by one node) in the
# path-split tree variant.
SPLIT_PROB = 0.5


class GraphError(ValueError):
    """Raised when a graph, edge list, or traversal violates an invariant."""


def _as_int(x) -> int:
    return int(x)


@dataclass(frozen=True)
class PathStarGraph:
    """D arms of M nodes sharing the start node; one arm is the answer."""

    start: int
    arms: tuple[tuple[int, ...], ...]
    target_arm_index: int
    node_universe_size: int

    @property
    def num_arms(self) -> int:
        return len(self.arms)

    @property
    def arm_len(self) -> int:
        return len(self.arms[0])

    @property
    def target_arm(self) -> tuple[int, ...]:
        return self.arms[self.target_arm_index]

    @property
    def target(self) -> int:
        return self.target_arm[-1]

    @property
    def leading_node(self) -> int:
        """First node after the start on the target arm."""
        return self.target_arm[1]

    @property
    def leading_nodes(self) -> tuple[int, ...]:
        return tuple(arm[1] for arm in self.arms)

    @property
    def node_count(self) -> int:
        return self.num_arms * (self.arm_len - 1) + 1

    def nodes(self) -> set[int]:
        out = {self.start}
        for arm in self.arms:
            out.update(arm[1:])
        return out

    def validate(self) -> None:
        d = self.num_arms
        if d < 2:
            raise GraphError(f"need at least 2 arms, got {d}")
        m = self.arm_len
        if m < 2:
            raise GraphError(f"need arm length >= 2, got {m}")
        if not 0 <= self.target_arm_index < d:
            raise GraphError(f"target arm index {self.target_arm_index} out of range")
        seen = {self.start}
        for arm in self.arms:
            if len(arm) != m:
                raise GraphError("arms must share one length")
            if arm[0] != self.start:
                raise GraphError("every arm must begin at the start node")
            for node in arm[1:]:
                if node in seen:
                    raise GraphError(f"node {node} appears in two arms")
                seen.add(node)
        if len(seen) != self.node_count:
            raise GraphError("node count mismatch")
        for node in seen:
            if not 1 <= node <= self.node_universe_size:
                raise GraphError(f"node id {node} outside universe")


def sample_path_star(
    d: int, m: int, vocab_size: int, rng: np.random.Generator
) -> PathStarGraph:
    """Sample a path-star graph with node ids drawn from 1..vocab_size.

    Node identities are assigned by drawing ``d*(m-1)+1`` ids without
    replacement in one pass: the first becomes s, the next m-1 fill arm 0 in
    path order, and so on.  The target arm is uniform over arms.
    """
    if d < 2 or m < 2:
        raise GraphError(f"need d >= 2 and m >= 2, got d={d} m={m}")
    size = d * (m - 1) + 1
    if vocab_size < size:
        raise GraphError(f"universe of {vocab_size} cannot hold {size} nodes")
    ids = rng.choice(vocab_size, size=size, replace=False) + 1
    start = _as_int(ids[0])
    arms = []
    pos = 1
    for _ in range(d):
        arm = (start,) + tuple(_as_int(x) for x in ids[pos : pos + m - 1])
        arms.append(arm)
        pos += m - 1
    target = _as_int(rng.integers(d))
    return PathStarGraph(
        start=start,
        arms=tuple(arms),
        target_arm_index=target,
        node_universe_size=vocab_size,
    )


def sample_space_size(d: int, m: int, vocab_size: int) -> int:
    """Number of distinct task instances: ordered node draws times the
    choice of target arm."""
    if d < 2 or m < 2:
        raise GraphError(f"need d >= 2 and m >= 2, got d={d} m={m}")
    size = d * (m - 1) + 1
    if vocab_size < size:
        raise GraphError(f"universe of {vocab_size} cannot hold {size} nodes")
    return math.perm(vocab_size, size) * d


@dataclass(frozen=True)
class StarTree:
    """Star of D subtrees rooted at a shared start node.

    ``children`` maps every internal node to its ordered children; the order
    records creation order and carries no traversal meaning.  ``traversal`` is
    the sampled reference answer: start followed by a pre-order walk of the
    target subtree in which, at each branch on the path to the target, the
    child leading to the target is visited last.
    """

    start: int
    children: dict[int, tuple[int, ...]] = field(hash=False)
    variant: str
    target: int
    target_arm_index: int
    traversal: tuple[int, ...]
    node_universe_size: int

    @property
    def num_arms(self) -> int:
        return len(self.children[self.start])

    @property
    def arm_len(self) -> int:
        return len(self.traversal)

    @property
    def target_arm(self) -> tuple[int, ...]:
        # The answer sequence; for trees this is the reference traversal.
        return self.traversal

    @property
    def leading_node(self) -> int:
        return self.traversal[1]

    def child_list(self, node: int) -> tuple[int, ...]:
        return self.children.get(node, ())

    def target_root(self) -> int:
        return self.children[self.start][self.target_arm_index]

    def parent_map(self) -> dict[int, int]:
        out = {}
        for parent, kids in self.children.items():
            for kid in kids:
                out[kid] = parent
        return out

    def target_path(self) -> tuple[int, ...]:
        """Nodes from the start to the target, inclusive."""
        parents = self.parent_map()
        path = [self.target]
        while path[-1] != self.start:
            path.append(parents[path[-1]])
        return tuple(reversed(path))

    def subtree_nodes(self, root: int) -> set[int]:
        out = set()
        stack = [root]
        while stack:
            node = stack.pop()
            out.add(node)
            stack.extend(self.child_list(node))
        return out

    def nodes(self) -> set[int]:
        return self.subtree_nodes(self.start)

    def validate(self) -> None:
        if self.variant not in ("d_ary", "split"):
            raise GraphError(f"unknown tree variant {self.variant!r}")
        arms = self.children.get(self.start, ())
        if len(arms) < 2:
            raise GraphError("need at least 2 subtrees at the start")
        if not 0 <= self.target_arm_index < len(arms):
            raise GraphError("target arm index out of range")
        # Every non-start node has exactly one parent and the graph is acyclic.
        seen = {self.start}
        for parent, kids in self.children.items():
            for kid in kids:
                if kid in seen and kid != self.start:
                    raise GraphError(f"node {kid} has two parents")
                if kid == self.start:
                    raise GraphError("start node cannot be a child")
                seen.add(kid)
        for node in seen:
            if not 1 <= node <= self.node_universe_size:
                raise GraphError(f"node id {node} outside universe")
        target_nodes = self.subtree_nodes(self.target_root()) | {self.start}
        if self.target not in target_nodes:
            raise GraphError("target not in designated subtree")
        if set(self.traversal) != target_nodes:
            raise GraphError("traversal must cover start plus the target subtree")
        if self.traversal[0] != self.start or self.traversal[-1] != self.target:
            raise GraphError("traversal must run from start to target")
        if not validate_traversal(self, self.traversal):
            raise GraphError("stored traversal is not a valid pre-order walk")
        if self.variant == "split":
            # Branching is confined to the path start..target; everything
            # else in the graph is a chain.
            on_path = set(self.target_path())
            for node, kids in self.children.items():
                if node == self.start:
                    continue
                if node in on_path:
                    if len(kids) > 2:
                        raise GraphError("split variant allows at most 2 children")
                elif len(kids) > 1:
                    raise GraphError(f"off-path node {node} branches in a split tree")


def sample_branch_count(rng: np.random.Generator) -> int:
    """Draw a child count in 1..4 for the d-ary variant."""
    u = rng.random()
    c = 1
    for threshold in _DARY_CUM[:-1]:
        if u >= threshold:
            c += 1
    return c


def _split_budget(budget: int, parts: int) -> list[int]:
    # Equal division; the remainder goes to the earliest-created subtree.
    base, rem = divmod(budget, parts)
    shares = [base] * parts
    shares[0] += rem
    return shares


def _grow_d_ary(
    parent: int,
    budget: int,
    ids: list[int],
    children: dict[int, list[int]],
    rng: np.random.Generator,
    branch_log: list[int] | None,
) -> None:
    if budget == 0:
        return
    c = sample_branch_count(rng)
    if branch_log is not None:
        branch_log.append(c)
    c = min(c, budget)
    for share in _split_budget(budget, c):
        kid = ids.pop()
        children.setdefault(parent, []).append(kid)
        _grow_d_ary(kid, share - 1, ids, children, rng, branch_log)


def _grow_split(
    parent: int,
    budget: int,
    ids: list[int],
    children: dict[int, list[int]],
    rng: np.random.Generator,
) -> int:
    """Grow the path-split variant under ``parent``; returns the spine end."""
    tip = parent
    while budget > 0:
        if budget >= 2 and rng.random() < SPLIT_PROB:
            left_budget, right_budget = _split_budget(budget, 2)
            # Left subtree is a plain path; the spine recurses on the right.
            chain = tip
            for _ in range(left_budget):
                kid = ids.pop()
                children.setdefault(chain, []).append(kid)
                chain = kid
            kid = ids.pop()
            children.setdefault(tip, []).append(kid)
            tip = kid
            budget = right_budget - 1
        else:
            kid = ids.pop()
            children.setdefault(tip, []).append(kid)
            tip = kid
            budget -= 1
    return tip


def sample_tree_star(
    d: int,
    m: int,
    vocab_size: int,
    variant: str,
    rng: np.random.Generator,
    branch_log: list[int] | None = None,
) -> StarTree:
    """Sample a star of D trees, each grown over an arm's node budget of m-1.

    ``branch_log``, when given, collects every raw d-ary branch decision
    before the budget cap is applied, so callers can audit the branching
    distribution.
    """
    if variant not in ("d_ary", "split"):
        raise GraphError(f"unknown tree variant {variant!r}")
    if d < 2 or m < 2:
        raise GraphError(f"need d >= 2 and m >= 2, got d={d} m={m}")
    size = d * (m - 1) + 1
    if vocab_size < size:
        raise GraphError(f"universe of {vocab_size} cannot hold {size} nodes")
    drawn = rng.choice(vocab_size, size=size, replace=False) + 1
    start = _as_int(drawn[0])
    ids = [_as_int(x) for x in drawn[1:]][::-1]  # pop() consumes in draw order
    children: dict[int, list[int]] = {}
    # Split trees branch only inside the subtree that holds the target, so
    # the target arm must be decided before growth.
    target_arm_index = _as_int(rng.integers(d))
    for k in range(d):
        root = ids.pop()
        children.setdefault(start, []).append(root)
        if variant == "d_ary":
            _grow_d_ary(root, m - 2, ids, children, rng, branch_log)
        elif k == target_arm_index:
            _grow_split(root, m - 2, ids, children, rng)
        else:
            tip = root
            for _ in range(m - 2):
                kid = ids.pop()
                children.setdefault(tip, []).append(kid)
                tip = kid
    frozen = {k: tuple(v) for k, v in children.items()}
    target = _pick_target(frozen, frozen[start][target_arm_index], variant, rng)
    tree = StarTree(
        start=start,
        children=frozen,
        variant=variant,
        target=target,
        target_arm_index=target_arm_index,
        traversal=(),
        node_universe_size=vocab_size,
    )
    traversal = _sample_traversal(tree, rng)
    return StarTree(
        start=start,
        children=frozen,
        variant=variant,
        target=target,
        target_arm_index=target_arm_index,
        traversal=traversal,
        node_universe_size=vocab_size,
    )


def _pick_target(
    children: dict[int, tuple[int, ...]],
    root: int,
    variant: str,
    rng: np.random.Generator,
) -> int:
    """Descend from the subtree root to a leaf that will serve as the target.

    For the split variant the target is the end of the recursion spine, which
    is always the last-created child at each 2-way branch.  For the d-ary
    variant the branch taken is uniform among children.
    """
    node = root
    while True:
        kids = children.get(node, ())
        if not kids:
            return node
        if variant == "split":
            node = kids[-1]
        else:
            node = kids[_as_int(rng.integers(len(kids)))]


def _sample_traversal(tree: StarTree, rng: np.random.Generator) -> tuple[int, ...]:
    """Pre-order walk of the target subtree with the target-bearing child
    visited last at each branch; sibling order is otherwise uniform."""
    on_target_path = set(tree.target_path())
    out = [tree.start]
    stack = [tree.target_root()]
    while stack:
        node = stack.pop()
        out.append(node)
        kids = list(tree.child_list(node))
        if not kids:
            continue
        last = None
        if node in on_target_path and node != tree.target:
            for kid in kids:
                if kid in on_target_path:
                    last = kid
                    break
        rest = [k for k in kids if k != last]
        order = [rest[i] for i in rng.permutation(len(rest))] if rest else []
        if last is not None:
            order.append(last)
        stack.extend(reversed(order))  # visit order[0] first
    return tuple(out)


def traversal_next_options(
    tree: StarTree, prefix: tuple[int, ...] | list[int]
) -> set[int]:
    """Set of nodes that may legally follow ``prefix`` in a traversal.

    The rule: resume at the deepest node on the walk's stack that still has
    unvisited children; among those children, the one leading to the target
    is withheld while any sibling remains unvisited.  An empty set means the
    traversal is complete.
    """
    steps = list(_traversal_steps(tree, prefix))
    return steps[-1] if steps else set()


def _traversal_steps(tree: StarTree, seq):
    """Yield, after each consumed prefix of ``seq``, the valid next-node set.

    Raises GraphError if ``seq`` itself ever departs from the valid sets, so
    callers can both validate traversals and read off per-step supervision.
    """
    if not seq or seq[0] != tree.start:
        raise GraphError("traversal must begin at the start node")
    on_target_path = set(tree.target_path())
    visited = {tree.start}
    # Stack of nodes whose children are not yet exhausted; the start only
    # exposes the target subtree root, never the other arms.
    stack = [tree.start]
    restricted_children = {tree.start: (tree.target_root(),)}

    def options() -> set[int]:
        while stack:
            node = stack[-1]
            kids = restricted_children.get(node, tree.child_list(node))
            unvisited = [k for k in kids if k not in visited]
            if not unvisited:
                stack.pop()
                continue
            if len(unvisited) > 1 and node in on_target_path:
                unvisited = [k for k in unvisited if k not in on_target_path]
            return set(unvisited)
        return set()

    for step in seq[1:]:
        valid = options()
        yield valid
        if step not in valid:
            raise GraphError(f"node {step} is not a valid continuation")
        visited.add(step)
        stack.append(step)
    yield options()


def validate_traversal(tree: StarTree, candidate) -> bool:
    """True iff ``candidate`` is a complete valid traversal ending at the
    target."""
    candidate = tuple(candidate)
    if not candidate or candidate[-1] != tree.target:
        return False
    try:
        steps = list(_traversal_steps(tree, candidate))
    except GraphError:
        return False
    return steps[-1] == set()


def enumerate_traversals(tree: StarTree) -> list[tuple[int, ...]]:
    """Exhaustively enumerate every valid traversal of the target subtree."""
    out = []
    size = len(tree.subtree_nodes(tree.target_root())) + 1

    def extend(prefix: list[int]) -> None:
        opts = traversal_next_options(tree, prefix)
        if not opts:
            if len(prefix) == size and prefix[-1] == tree.target:
                out.append(tuple(prefix))
            return
        for node in sorted(opts):
            prefix.append(node)
            extend(prefix)
            prefix.pop()

    extend([tree.start])
    return out


@dataclass(frozen=True)
class EdgeList:
    edges: tuple[tuple[int, int], ...]
    shuffle_mode: str


def _path_star_edges(graph: PathStarGraph) -> list[list[tuple[int, int]]]:
    return [
        [(arm[i], arm[i + 1]) for i in range(len(arm) - 1)] for arm in graph.arms
    ]


def _tree_edges(tree: StarTree) -> list[tuple[int, int]]:
    out = []
    stack = [tree.start]
    while stack:
        node = stack.pop()
        for kid in tree.child_list(node):
            out.append((node, kid))
            stack.append(kid)
    return out


def edge_list(
    graph: PathStarGraph | StarTree,
    shuffle_mode: str,
    rng: np.random.Generator,
) -> EdgeList:
    """Directed edges of the whole star under the requested presentation order.

    edge_wise draws a uniform permutation of all edges.  arm_wise keeps each
    arm's edges contiguous in path order and permutes the arm blocks.
    causal_wise repeatedly picks a uniformly random non-exhausted arm and
    emits its frontmost remaining edge, so every prefix is topologically
    closed arm by arm.  Trees support edge_wise only.
    """
    if isinstance(graph, StarTree):
        if shuffle_mode != "edge_wise":
            raise GraphError(f"trees support edge_wise only, got {shuffle_mode!r}")
        edges = _tree_edges(graph)
        order = rng.permutation(len(edges))
        return EdgeList(tuple(edges[i] for i in order), shuffle_mode)

    per_arm = _path_star_edges(graph)
    if shuffle_mode == "edge_wise":
        flat = [e for arm in per_arm for e in arm]
        order = rng.permutation(len(flat))
        return EdgeList(tuple(flat[i] for i in order), shuffle_mode)
    if shuffle_mode == "arm_wise":
        order = rng.permutation(len(per_arm))
        return EdgeList(
            tuple(e for i in order for e in per_arm[i]), shuffle_mode
        )
    if shuffle_mode == "causal_wise":
        pending = [list(arm) for arm in per_arm]
        active = [i for i, arm in enumerate(pending) if arm]
        out = []
        while active:
            slot = _as_int(rng.integers(len(active)))
            arm = pending[active[slot]]
            out.append(arm.pop(0))
            if not arm:
                active.pop(slot)
        return EdgeList(tuple(out), shuffle_mode)
    raise GraphError(f"unknown shuffle mode {shuffle_mode!r}")


def adjacency(edges) -> dict[int, list[int]]:
    """Successor map of a directed edge list; insertion order preserved."""
    adj: dict[int, list[int]] = {}
    for u, v in edges:
        adj.setdefault(u, []).append(v)
    return adj
