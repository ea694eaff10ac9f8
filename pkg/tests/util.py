"""Shared test helpers: instance generators and independent oracles."""

from __future__ import annotations

from collections import Counter

import numpy as np

from morphindex.core import (
    ArrayNode,
    BinTreeNode,
    ConcatNode,
    Handle,
    SortedNode,
    walk_handles,
)
from morphindex.transforms import ATOMICS, is_active


def leaf_from_keys(keys, values=None, sorted_kind=False):
    cls = SortedNode if sorted_kind else ArrayNode
    return cls(keys, values)


def random_arbitrary_instance(rng: np.random.Generator, max_depth=5, leaf_max=30,
                              key_lo=-50, key_hi=50):
    """Random instance with no structural guarantees (separators arbitrary)."""
    if max_depth == 0 or rng.random() < 0.4:
        n = int(rng.integers(0, leaf_max + 1))
        keys = rng.integers(key_lo, key_hi, size=n, endpoint=True).astype(np.int64)
        values = rng.integers(0, 1000, size=n).astype(np.int64)
        roll = rng.random()
        if roll < 0.4:
            order = np.argsort(keys, kind="stable")
            return SortedNode(keys[order], values[order])
        if roll < 0.5:
            # Mislabeled: claims sortedness without having it.
            return SortedNode(keys, values)
        return ArrayNode(keys, values)
    left = random_arbitrary_instance(rng, max_depth - 1, leaf_max, key_lo, key_hi)
    right = random_arbitrary_instance(rng, max_depth - 1, leaf_max, key_lo, key_hi)
    if rng.random() < 0.5:
        return ConcatNode(Handle(left), Handle(right))
    sep = int(rng.integers(key_lo, key_hi, endpoint=True))
    return BinTreeNode(sep, Handle(left), Handle(right))


def _build_correct(rng, keys, values, depth):
    # keys arrive sorted ascending; values aligned.
    n = len(keys)
    choice = rng.random()
    if depth <= 0 or n <= 1 or choice < 0.35:
        if rng.random() < 0.5:
            return SortedNode(keys, values)
        order = rng.permutation(n)
        return ArrayNode(keys[order], values[order])
    if choice < 0.65:
        mask = rng.random(n) < 0.5
        left = _build_correct(rng, keys[mask], values[mask], depth - 1)
        right = _build_correct(rng, keys[~mask], values[~mask], depth - 1)
        return ConcatNode(Handle(left), Handle(right))
    # Partition node: the boundary must fall between distinct keys.
    cuts = np.nonzero(keys[:-1] < keys[1:])[0]
    if len(cuts) == 0:
        return SortedNode(keys, values)
    i = int(rng.choice(cuts)) + 1
    sep = int(keys[i])
    left = _build_correct(rng, keys[:i], values[:i], depth - 1)
    right = _build_correct(rng, keys[i:], values[i:], depth - 1)
    return BinTreeNode(sep, Handle(left), Handle(right))


def random_correct_instance(rng: np.random.Generator, max_records=200, max_depth=5,
                            key_lo=-10**6, key_hi=10**6):
    """Random structurally correct instance over random records."""
    n = int(rng.integers(0, max_records + 1))
    keys = np.sort(rng.integers(key_lo, key_hi, size=n, endpoint=True).astype(np.int64))
    values = rng.integers(0, 10**6, size=n).astype(np.int64)
    return _build_correct(rng, keys, values, max_depth)


def weighted_targets(root: Handle, score) -> Counter:
    """Full bag of (handle identity, transform, score) over the active domain."""
    bag: Counter = Counter()
    for handle, node in walk_handles(root):
        for t in ATOMICS:
            if is_active(t, node):
                bag[(handle.identity, t, score(t, node))] += 1
    return bag


def bag_symmetric_difference(a: Counter, b: Counter) -> int:
    return sum(((a - b) + (b - a)).values())


def queue_entry_set(queue) -> set:
    return {(e.handle.identity, e.atomic, e.score) for e in queue.entries()}


def brute_force_records(node):
    """All records as a list of (key, value), via logical contents."""
    from morphindex.core import contents

    return [(r.key, r.value) for r in contents(node).records()]
