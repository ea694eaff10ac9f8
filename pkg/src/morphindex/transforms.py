"""Rewrite rules over index instances.

Eight atomic transforms rewrite a node into a logically equivalent one:
Sort/UnSort convert between the two leaf kinds, Divide and Crack fragment
an array leaf (into a Concat or a key-partitioned BinTree respectively),
Merge reverts fragmentation, and the two Pivots rotate inner nodes.  Every
transform is total: on nodes where its pattern does not match it returns
its input unchanged (the same object), which doubles as the "did anything
happen" signal.

Transforms can be pushed below the root by the ``lhs``/``rhs`` wrappers,
or addressed by a path of left/right steps plus an atomic transform
(:class:`HierarchicalTransform`), which is how the scheduler applies a
rewrite deep in the tree with a single handle swap.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    ArrayNode,
    BinTreeNode,
    ConcatNode,
    Handle,
    Node,
    SortedNode,
    is_leaf,
)


class Atomic(enum.Enum):
    IDENTITY = "identity"
    SORT = "sort"
    UNSORT = "unsort"
    DIVIDE = "divide"
    CRACK = "crack"
    MERGE = "merge"
    PIVOT_LEFT = "pivot_left"
    PIVOT_RIGHT = "pivot_right"


ATOMICS = tuple(Atomic)


class Side(enum.Enum):
    LHS = "lhs"
    RHS = "rhs"


@dataclass(frozen=True)
class HierarchicalTransform:
    """A path of left/right steps ending in an atomic transform."""

    path: tuple[Side, ...]
    atomic: Atomic


def sort_leaf(node: ArrayNode) -> SortedNode:
    order = np.argsort(node.keys, kind="stable")
    return SortedNode(node.keys.take(order), node.values.take(order))


def _sort(node):
    if isinstance(node, ArrayNode):
        return sort_leaf(node)
    return node


def _unsort(node):
    if isinstance(node, SortedNode):
        return ArrayNode(node.keys, node.values)
    return node


def _divide(node):
    # Splitting off an empty half would add a useless node, so arrays with
    # fewer than two records are left alone.
    if not isinstance(node, ArrayNode) or node.n < 2:
        return node
    mid = node.n // 2
    left = ArrayNode(node.keys[:mid], node.values[:mid])
    right = ArrayNode(node.keys[mid:], node.values[mid:])
    return ConcatNode(Handle(left), Handle(right))


def _crack(node):
    if not isinstance(node, ArrayNode) or node.n < 2:
        return node
    keys = node.keys
    pivot = int(keys[node.n // 2])
    # Boolean-mask partition: slightly slower than an index-based gather in
    # cache, but its per-record cost is nearly scale-independent, which the
    # fitted linear cost model depends on.
    mask = keys < pivot
    if not mask.any():
        # The median-position key is the leaf minimum, so the partition
        # around it would be empty on the left and make no progress.  Any
        # element is a valid pivot; fall back to the maximum key, which
        # splits strictly unless every key is equal (then nothing can).
        pivot = int(keys.max())
        mask = keys < pivot
        if not mask.any():
            return node
    inv = ~mask
    left = ArrayNode(keys[mask], node.values[mask])
    right = ArrayNode(keys[inv], node.values[inv])
    return BinTreeNode(pivot, Handle(left), Handle(right))


def _merge_sorted(a: SortedNode, b: SortedNode) -> SortedNode:
    """Two-way merge; records of ``a`` come first among equal keys.

    Implemented as a stable reorder of the concatenation (radix sort for
    integer keys, so linear in the output).  Unlike a cursor merge this
    stays a permutation, and therefore contents-preserving, even if a leaf
    was mislabeled sorted inside a structurally incorrect instance.
    """
    keys = np.concatenate((a.keys, b.keys))
    values = np.concatenate((a.values, b.values))
    order = np.argsort(keys, kind="stable")
    return SortedNode(keys[order], values[order])


def _merge(node):
    if not isinstance(node, (ConcatNode, BinTreeNode)):
        return node
    left = node.left.get()
    right = node.right.get()
    if isinstance(left, ArrayNode) and isinstance(right, ArrayNode):
        return ArrayNode(
            np.concatenate((left.keys, right.keys)),
            np.concatenate((left.values, right.values)),
        )
    if isinstance(left, SortedNode) and isinstance(right, SortedNode):
        if isinstance(node, BinTreeNode):
            # The separator already orders the halves; plain concatenation
            # of the two runs is sorted.
            return SortedNode(
                np.concatenate((left.keys, right.keys)),
                np.concatenate((left.values, right.values)),
            )
        return _merge_sorted(left, right)
    return node


def _pivot_left(node):
    if isinstance(node, ConcatNode):
        right = node.right.get()
        if isinstance(right, ConcatNode):
            inner = ConcatNode(node.left, right.left)
            return ConcatNode(Handle(inner), right.right)
    elif isinstance(node, BinTreeNode):
        right = node.right.get()
        if isinstance(right, BinTreeNode) and node.separator < right.separator:
            inner = BinTreeNode(node.separator, node.left, right.left)
            return BinTreeNode(right.separator, Handle(inner), right.right)
    return node


def _pivot_right(node):
    if isinstance(node, ConcatNode):
        left = node.left.get()
        if isinstance(left, ConcatNode):
            inner = ConcatNode(left.right, node.right)
            return ConcatNode(left.left, Handle(inner))
    elif isinstance(node, BinTreeNode):
        left = node.left.get()
        if isinstance(left, BinTreeNode) and left.separator < node.separator:
            inner = BinTreeNode(node.separator, left.right, node.right)
            return BinTreeNode(left.separator, left.left, Handle(inner))
    return node


_APPLY = {
    Atomic.IDENTITY: lambda node: node,
    Atomic.SORT: _sort,
    Atomic.UNSORT: _unsort,
    Atomic.DIVIDE: _divide,
    Atomic.CRACK: _crack,
    Atomic.MERGE: _merge,
    Atomic.PIVOT_LEFT: _pivot_left,
    Atomic.PIVOT_RIGHT: _pivot_right,
}


def apply_atomic(t: Atomic, node: Node) -> Node:
    """Apply one atomic transform; returns the input object when inert."""
    return _APPLY[t](node)


def is_active(t: Atomic, node) -> bool:
    """Whether ``t`` would change ``node``, decided without building the result.

    Mirrors :func:`apply_atomic` case by case; ``is_active(t, n)`` is True
    exactly when ``apply_atomic(t, n) is not n``.
    """
    kind = node.kind
    if t is Atomic.SORT:
        return kind == "array"
    if t is Atomic.UNSORT:
        return kind == "sorted"
    if t is Atomic.DIVIDE:
        return kind == "array" and node.n >= 2
    if t is Atomic.CRACK:
        return kind == "array" and node.n >= 2 and node.has_distinct_keys
    if t is Atomic.MERGE:
        if kind not in ("concat", "bintree"):
            return False
        lk = node.left.get().kind
        rk = node.right.get().kind
        return lk == rk and lk in ("array", "sorted")
    if t is Atomic.PIVOT_LEFT:
        if kind == "concat":
            return node.right.get().kind == "concat"
        if kind == "bintree":
            right = node.right.get()
            return right.kind == "bintree" and node.separator < right.separator
        return False
    if t is Atomic.PIVOT_RIGHT:
        if kind == "concat":
            return node.left.get().kind == "concat"
        if kind == "bintree":
            left = node.left.get()
            return left.kind == "bintree" and left.separator < node.separator
        return False
    return False


Transform = Callable[[Node], Node]


def as_function(t: Atomic) -> Transform:
    return _APPLY[t]


def compose(t1: Transform, t2: Transform) -> Transform:
    """Function composition in application order: ``compose(t1, t2)(c) == t2(t1(c))``."""

    def composed(node):
        return t2(t1(node))

    return composed


def lhs(t: Transform) -> Transform:
    """Push a transform onto the left child; identity on leaves."""

    def wrapped(node):
        if is_leaf(node):
            return node
        child = node.left.get()
        new_child = t(child)
        if new_child is child:
            return node
        if isinstance(node, BinTreeNode):
            return BinTreeNode(node.separator, Handle(new_child), node.right)
        return ConcatNode(Handle(new_child), node.right)

    return wrapped


def rhs(t: Transform) -> Transform:
    """Push a transform onto the right child; identity on leaves."""

    def wrapped(node):
        if is_leaf(node):
            return node
        child = node.right.get()
        new_child = t(child)
        if new_child is child:
            return node
        if isinstance(node, BinTreeNode):
            return BinTreeNode(node.separator, node.left, Handle(new_child))
        return ConcatNode(node.left, Handle(new_child))

    return wrapped


def as_hierarchical_function(t: HierarchicalTransform) -> Transform:
    fn = as_function(t.atomic)
    for step in reversed(t.path):
        fn = lhs(fn) if step is Side.LHS else rhs(fn)
    return fn


def target(t: HierarchicalTransform, root: Node):
    """Resolve which descendant an addressed transform would rewrite.

    Walks the path through inner-node children and returns the reached
    node together with the atomic transform.  Returns ``None`` when the
    path hits a leaf before it is exhausted; the wrappers act as the
    identity there, so the transform has no target on this instance.
    """
    node = root
    for step in t.path:
        if is_leaf(node):
            return None
        handle = node.left if step is Side.LHS else node.right
        node = handle.get()
    return node, t.atomic


def apply_hierarchical(t: HierarchicalTransform, root_handle: Handle) -> bool:
    """Apply an addressed transform with a single handle swap.

    Walks the path from the root handle; if it bottoms out early the call
    is a no-op and returns False.  Otherwise the target handle's node is
    swapped for the rewritten one (ancestors are untouched) and the return
    value reports whether the node actually changed.
    """
    handle = root_handle
    for step in t.path:
        node = handle.get()
        if is_leaf(node):
            return False
        handle = node.left if step is Side.LHS else node.right
    old = handle.get()
    new = apply_atomic(t.atomic, old)
    if new is old:
        return False
    handle.swap(new)
    return True
