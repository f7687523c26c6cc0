"""Graph generation, shuffle disciplines, trees, and counting.

Frozen oracle values live here: the sample-space counts for tiny settings
were confirmed by brute-force enumeration before the formula was trusted.
"""

import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathstar.graphs import (
    GraphError,
    edge_list,
    enumerate_traversals,
    sample_branch_count,
    sample_path_star,
    sample_space_size,
    sample_tree_star,
    traversal_next_options,
    validate_traversal,
)

from conftest import make_graph


# -- path-star sampling ------------------------------------------------------


def test_minimal_graph_shape(rng):
    g = sample_path_star(2, 2, 3, rng)
    assert g.node_count == 3
    assert len(set(g.nodes())) == 3
    for arm in g.arms:
        assert len(arm) == 2 and arm[0] == g.start


def test_tight_universe_graph_shape(rng):
    # D=12 arms of M=5, universe exactly |G|=49: every node appears
    g = sample_path_star(12, 5, 49, rng)
    assert g.num_arms == 12 and g.arm_len == 5
    assert g.node_count == 49
    assert sorted(g.nodes()) == list(range(1, 50))
    assert g.target == g.target_arm[-1]
    assert g.leading_node == g.target_arm[1]


def test_universe_too_small_rejected(rng):
    with pytest.raises(GraphError):
        sample_path_star(3, 5, 12, rng)  # needs 13


def test_degree_histogram(rng):
    for _ in range(50):
        g = sample_path_star(4, 6, 21, rng)
        deg = Counter()
        for arm in g.arms:
            for u, v in zip(arm, arm[1:]):
                deg[u] += 1
                deg[v] += 1
        assert deg[g.start] == 4
        for arm in g.arms:
            assert deg[arm[-1]] == 1
            for mid in arm[1:-1]:
                assert deg[mid] == 2


def test_target_arm_uniform(rng):
    counts = Counter(
        sample_path_star(3, 5, 13, rng).target_arm_index for _ in range(10_000)
    )
    for i in range(3):
        assert abs(counts[i] / 10_000 - 1 / 3) < 0.02


def test_same_seed_same_graph():
    a = sample_path_star(3, 4, 12, np.random.default_rng(7))
    b = sample_path_star(3, 4, 12, np.random.default_rng(7))
    assert a == b


@given(
    d=st.integers(2, 5),
    m=st.integers(2, 7),
    slack=st.integers(0, 30),
    seed=st.integers(0, 2**31),
)
@settings(max_examples=60, deadline=None)
def test_graph_invariants_hold(d, m, slack, seed):
    size = d * (m - 1) + 1
    g = sample_path_star(d, m, size + slack, np.random.default_rng(seed))
    g.validate()
    assert g.node_count == size
    assert all(1 <= n <= size + slack for n in g.nodes())


# -- counting ----------------------------------------------------------------


def test_sample_space_frozen_values():
    # brute-force confirmed: perm(V, |G|) * D
    assert sample_space_size(2, 2, 3) == 12
    assert sample_space_size(2, 2, 4) == 48
    assert sample_space_size(2, 2, 5) == 120


def test_sample_space_formula():
    assert sample_space_size(3, 5, 20) == math.perm(20, 13) * 3


def test_sample_space_rejects_bad_domains():
    with pytest.raises(GraphError):
        sample_space_size(1, 5, 100)
    with pytest.raises(GraphError):
        sample_space_size(2, 5, 8)


def test_enumeration_matches_formula():
    """Count distinct (assignment, target) pairs by exhaustion for D=2, M=2."""
    from itertools import permutations

    for v in (3, 4, 5):
        seen = set()
        for nodes in permutations(range(1, v + 1), 3):
            s, a, b = nodes
            for target_arm in (0, 1):
                seen.add((s, a, b, target_arm))
        assert len(seen) == sample_space_size(2, 2, v)


# -- edge lists --------------------------------------------------------------


def _edges_of(g):
    return {(u, v) for arm in g.arms for u, v in zip(arm, arm[1:])}


def test_edge_list_is_exact_permutation(rng, small_graph):
    for mode in ("edge_wise", "arm_wise", "causal_wise"):
        el = edge_list(small_graph, mode, rng)
        assert set(el.edges) == _edges_of(small_graph)
        assert len(el.edges) == 9


def test_edge_wise_reaches_both_orders_of_two_edges():
    g = make_graph([(1, 2), (1, 3)], vocab_size=3)
    orders = set()
    rng = np.random.default_rng(0)
    for _ in range(64):
        orders.add(tuple(edge_list(g, "edge_wise", rng).edges))
    assert len(orders) == 2


def test_causal_order_predicate(rng):
    for _ in range(200):
        g = sample_path_star(3, 6, 16, rng)
        el = edge_list(g, "causal_wise", rng)
        pos = {e: i for i, e in enumerate(el.edges)}
        for arm in g.arms:
            arm_edges = list(zip(arm, arm[1:]))
            for earlier, later in zip(arm_edges, arm_edges[1:]):
                assert pos[earlier] < pos[later]


def test_causal_is_not_always_contiguous(rng):
    # interleaving must actually happen, otherwise it's arm_wise in disguise
    g = sample_path_star(3, 6, 16, np.random.default_rng(5))
    interleaved = 0
    for _ in range(50):
        el = edge_list(g, "causal_wise", rng)
        arm_of = {}
        for i, arm in enumerate(g.arms):
            for e in zip(arm, arm[1:]):
                arm_of[e] = i
        runs = [arm_of[e] for e in el.edges]
        if any(a != b and a in runs[i + 1 :] for i, (a, b) in enumerate(zip(runs, runs[1:]))):
            interleaved += 1
    assert interleaved > 0


def test_arm_wise_blocks(rng):
    for _ in range(100):
        g = sample_path_star(4, 5, 17, rng)
        el = edge_list(g, "arm_wise", rng)
        arm_edges = [list(zip(a, a[1:])) for a in g.arms]
        chunks = [el.edges[i : i + 4] for i in range(0, 16, 4)]
        assert sorted(map(tuple, chunks)) == sorted(map(tuple, arm_edges))


def test_tree_edge_list_modes(rng):
    tree = sample_tree_star(2, 5, 9, "split", rng)
    el = edge_list(tree, "edge_wise", rng)
    assert len(el.edges) == 8
    for mode in ("arm_wise", "causal_wise"):
        with pytest.raises(GraphError):
            edge_list(tree, mode, rng)


# -- trees -------------------------------------------------------------------


def test_split_budget_one_is_pure_path(rng):
    # M=2 leaves one non-start node per arm: nothing to split
    for _ in range(20):
        tree = sample_tree_star(2, 2, 3, "split", rng)
        assert all(
            len(kids) <= 1 for node, kids in tree.children.items() if node != tree.start
        )


def test_split_branch_nodes_have_two_children(rng):
    for _ in range(100):
        tree = sample_tree_star(2, 5, 9, "split", rng)
        tree.validate()
        on_path = set(tree.target_path())
        for node, kids in tree.children.items():
            if node == tree.start:
                continue
            if node in on_path:
                assert len(kids) in (0, 1, 2)
            else:
                assert len(kids) <= 1


def test_split_traversal_unique(rng):
    for _ in range(60):
        tree = sample_tree_star(2, 5, 9, "split", rng)
        assert enumerate_traversals(tree) == [tuple(tree.traversal)]


def test_tree_node_budget_matches_path_star(rng):
    for d, m in ((2, 5), (3, 4), (4, 3)):
        for variant in ("d_ary", "split"):
            tree = sample_tree_star(d, m, d * (m - 1) + 1, variant, rng)
            total = 1 + sum(len(tree.subtree_nodes(c)) for c in tree.children[tree.start])
            assert total == d * (m - 1) + 1


def test_traversal_starts_and_ends_right(rng):
    for variant in ("d_ary", "split"):
        for _ in range(50):
            tree = sample_tree_star(3, 4, 10, variant, rng)
            assert tree.traversal[0] == tree.start
            assert tree.traversal[-1] == tree.target


def test_d_ary_target_subtree_last_at_branches(rng):
    """At every branch on the target path, siblings not holding t come first."""
    checked = 0
    for _ in range(300):
        tree = sample_tree_star(3, 5, 13, "d_ary", rng)
        order = {n: i for i, n in enumerate(tree.traversal)}
        path = set(tree.target_path())
        for node in tree.target_path()[:-1]:
            kids = tree.children.get(node, ())
            if len(kids) < 2 or node == tree.start:
                continue
            t_kid = next(k for k in kids if k in path)
            others = [k for k in kids if k != t_kid and k in order]
            if others:
                checked += 1
                assert order[t_kid] > max(order[k] for k in others)
    assert checked > 20


def test_validator_agrees_with_enumeration(rng):
    for i in range(150):
        variant = ("d_ary", "split")[i % 2]
        tree = sample_tree_star(2, 5, 9, variant, rng)
        valid = set(enumerate_traversals(tree))
        assert tuple(tree.traversal) in valid
        for cand in valid:
            assert validate_traversal(tree, cand)
        # swapping interior nodes must not stay valid unless enumerated
        bad = list(tree.traversal)
        if len(bad) > 3:
            bad[1], bad[2] = bad[2], bad[1]
            assert validate_traversal(tree, bad) == (tuple(bad) in valid)


def test_traversal_next_options_prefix_consistency(rng):
    tree = sample_tree_star(3, 4, 10, "d_ary", rng)
    seq = tree.traversal
    for k in range(1, len(seq)):
        opts = traversal_next_options(tree, seq[:k])
        assert seq[k] in opts


def test_branch_count_support(rng):
    counts = {sample_branch_count(rng) for _ in range(2000)}
    assert counts == {1, 2, 3, 4}
