import numpy as np
import pytest

from pathstar.graphs import PathStarGraph, sample_path_star


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_graph(rng):
    # D=3, M=4, exactly-filled universe
    return sample_path_star(3, 4, 10, rng)


def make_graph(arms, vocab_size=None):
    """Hand-build a PathStarGraph from explicit arm tuples (target = arm 0)."""
    nodes = {n for arm in arms for n in arm}
    return PathStarGraph(
        start=arms[0][0],
        arms=tuple(tuple(a) for a in arms),
        target_arm_index=0,
        node_universe_size=vocab_size or max(nodes),
    )


@pytest.fixture
def fig_graph():
    """The well-known worked example: target arm 29 12 6 59 2 out of D=2."""
    return make_graph(
        [(29, 12, 6, 59, 2), (29, 33, 44, 21, 7)],
        vocab_size=60,
    )
