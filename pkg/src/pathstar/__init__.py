"""Path-star graph search as a next-token-prediction testbed.

Tools for generating star-shaped path graphs and tree variants, serializing
them as token sequences, reshaping the supervision signal (edge shuffles,
scratchpads, target masking, auxiliary objectives), training a small
from-scratch transformer on the result, and measuring whether the model
recovers the one hard decision in the task: the first step off the start
node.
"""

from .graphs import (
    EdgeList,
    GraphError,
    PathStarGraph,
    StarTree,
    edge_list,
    sample_path_star,
    sample_space_size,
    sample_tree_star,
)
from .tokens import ParseError, Query, TokenizedExample, Vocabulary, build_query, parse_example, tokenize
from .supervision import (
    MaskPlan,
    ScratchpadPlan,
    apply_mask_plan,
    build_aux_targets,
    build_scratchpad,
    build_tree_targets,
    sample_span_plan,
    sample_uniform_mask,
)
from .model import Adam, ModelConfig, Transformer, load_checkpoint, save_checkpoint
from .training import Batch, ExperimentSpec, RunRecord, build_example, make_batch, run_experiment, run_seed, train_step
from .evaluation import EvalReport, generative_eval, solve_path_oracle, teacher_forced_eval

__all__ = [
    "Adam",
    "Batch",
    "EdgeList",
    "EvalReport",
    "ExperimentSpec",
    "GraphError",
    "MaskPlan",
    "ModelConfig",
    "ParseError",
    "PathStarGraph",
    "Query",
    "RunRecord",
    "ScratchpadPlan",
    "StarTree",
    "TokenizedExample",
    "Transformer",
    "Vocabulary",
    "apply_mask_plan",
    "build_aux_targets",
    "build_example",
    "build_query",
    "build_scratchpad",
    "build_tree_targets",
    "edge_list",
    "generative_eval",
    "load_checkpoint",
    "make_batch",
    "parse_example",
    "run_experiment",
    "run_seed",
    "sample_path_star",
    "sample_space_size",
    "sample_span_plan",
    "sample_tree_star",
    "sample_uniform_mask",
    "save_checkpoint",
    "solve_path_oracle",
    "teacher_forced_eval",
    "tokenize",
    "train_step",
]

__version__ = "0.1.0"
