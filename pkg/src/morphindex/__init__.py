"""Adaptive in-memory key-value index with background reorganization.

The physical layout of the index is a tree of composable building blocks
that policy-driven rewrite transforms reshape incrementally while readers
keep full access.  A data-free simulator predicts how candidate policies
will perform, and the bench CLI reproduces the performance curves at desk
scale.
"""

from .core import (
    ArrayNode,
    Bag,
    BinTreeNode,
    ConcatNode,
    Handle,
    Record,
    SortedNode,
    contents,
    descendants,
    is_structurally_correct,
    logically_equivalent,
)
from .policy import (
    PolicyQueue,
    Scheduler,
    TargetEntry,
    build_queue,
    run_to_convergence,
    score_crack_sort_merge,
    trace,
)
from .runtime import Index, OrderedIterator
from .simulator import (
    CostModel,
    LightArray,
    LightBinTree,
    LightConcat,
    LightSorted,
    StatusInterval,
    evaluate_utility,
    fit_cost_model,
    optimize_policy,
    predicted_latency,
    simulate,
    time_to_convergence,
    time_until_latency_below,
    total_workload_time,
)
from .transforms import (
    Atomic,
    HierarchicalTransform,
    Side,
    apply_atomic,
    apply_hierarchical,
    compose,
    lhs,
    rhs,
    target,
)

__all__ = [
    "ArrayNode", "Bag", "BinTreeNode", "ConcatNode", "Handle", "Record", "SortedNode",
    "contents", "descendants", "is_structurally_correct", "logically_equivalent",
    "PolicyQueue", "Scheduler", "TargetEntry", "build_queue", "run_to_convergence",
    "score_crack_sort_merge", "trace",
    "Index", "OrderedIterator",
    "CostModel", "LightArray", "LightBinTree", "LightConcat", "LightSorted",
    "StatusInterval", "evaluate_utility", "fit_cost_model", "optimize_policy",
    "predicted_latency", "simulate", "time_to_convergence", "time_until_latency_below",
    "total_workload_time",
    "Atomic", "HierarchicalTransform", "Side", "apply_atomic", "apply_hierarchical",
    "compose", "lhs", "rhs", "target",
]

__version__ = "0.1.0"
