from __future__ import annotations

import numpy as np
import pytest

from morphindex.core import (
    ArrayNode,
    BinTreeNode,
    ConcatNode,
    Handle,
    SortedNode,
    contents,
    is_structurally_correct,
    logically_equivalent,
)
from morphindex.policy import (
    PolicyQueue,
    Scheduler,
    TargetEntry,
    build_queue,
    run_to_convergence,
    score_crack_sort_merge,
    trace,
)
from morphindex.transforms import ATOMICS, Atomic, apply_atomic
from util import (
    bag_symmetric_difference,
    queue_entry_set,
    random_arbitrary_instance,
    random_correct_instance,
    weighted_targets,
)


def distinct_keys(rng, n):
    return rng.permutation(np.arange(n, dtype=np.int64) * 7 - 3 * n)


# -- scoring -----------------------------------------------------------------


def test_score_sort_below_threshold():
    score = score_crack_sort_merge(1000)
    assert score(Atomic.SORT, ArrayNode(np.arange(500))) == 500


def test_score_crack_at_or_above_threshold():
    score = score_crack_sort_merge(1000)
    assert score(Atomic.CRACK, ArrayNode(np.arange(5000))) == 5000
    assert score(Atomic.CRACK, ArrayNode(np.arange(1000))) == 1000
    assert score(Atomic.SORT, ArrayNode(np.arange(1000))) == 0


def test_score_zero_on_sorted_leaf():
    score = score_crack_sort_merge(1000)
    assert score(Atomic.SORT, SortedNode(np.arange(500))) == 0


def test_score_merge_sums_child_counts():
    score = score_crack_sort_merge(1000)
    node = BinTreeNode(100, Handle(SortedNode(np.arange(10))), Handle(SortedNode(np.arange(100, 120))))
    assert score(Atomic.MERGE, node) == 30
    mixed = BinTreeNode(100, Handle(ArrayNode(np.arange(10))), Handle(SortedNode(np.arange(100, 120))))
    assert score(Atomic.MERGE, mixed) == 0


def test_score_requires_theta_at_least_two():
    with pytest.raises(ValueError):
        score_crack_sort_merge(1)


def test_positive_score_implies_transform_changes_node(rng):
    # Includes duplicate-heavy leaves, where cracking may be impossible.
    score = score_crack_sort_merge(4)
    checked = 0
    while checked < 10_000:
        node = random_arbitrary_instance(rng, max_depth=2, key_lo=-3, key_hi=3)
        for t in ATOMICS:
            if score(t, node) > 0:
                assert apply_atomic(t, node) is not node
            checked += 1


# -- queue construction ---------------------------------------------------------


def test_build_queue_single_array_prefers_crack():
    root = Handle(ArrayNode(np.arange(10)))
    queue = build_queue(root, score_crack_sort_merge(5))
    assert queue_entry_set(queue) == {(root.identity, Atomic.CRACK, 10)}


def test_build_queue_sorted_leaf_is_converged():
    queue = build_queue(Handle(SortedNode(np.arange(10))), score_crack_sort_merge(5))
    assert len(queue) == 0


def test_build_queue_concat_of_small_arrays():
    left = Handle(ArrayNode(np.arange(3)))
    right = Handle(ArrayNode(np.arange(4)))
    root = Handle(ConcatNode(left, right))
    queue = build_queue(root, score_crack_sort_merge(100))
    assert queue_entry_set(queue) == {
        (left.identity, Atomic.SORT, 3),
        (right.identity, Atomic.SORT, 4),
    }


def test_queue_pop_order_and_tie_break():
    queue = PolicyQueue()
    h1, h2, h3 = Handle(ArrayNode([])), Handle(ArrayNode([])), Handle(ArrayNode([]))
    queue.set(TargetEntry(h2, h2.generation, Atomic.SORT, 5))
    queue.set(TargetEntry(h1, h1.generation, Atomic.SORT, 5))
    queue.set(TargetEntry(h3, h3.generation, Atomic.CRACK, 9))
    order = [queue.pop().handle for _ in range(3)]
    assert order == [h3, h1, h2]  # score first, then smaller identity
    assert queue.pop() is None


def test_queue_replaces_entry_per_handle():
    queue = PolicyQueue()
    h = Handle(ArrayNode([]))
    queue.set(TargetEntry(h, h.generation, Atomic.SORT, 5))
    queue.set(TargetEntry(h, h.generation, Atomic.CRACK, 7))
    assert len(queue) == 1
    entry = queue.pop()
    assert entry.atomic is Atomic.CRACK and entry.score == 7
    assert queue.pop() is None


# -- stepping ---------------------------------------------------------------------


def test_step_crack_then_children_enqueued(rng):
    root = Handle(ArrayNode(distinct_keys(rng, 10)))
    scheduler = Scheduler(root, score_crack_sort_merge(5))
    assert scheduler.step()
    node = root.get()
    assert isinstance(node, BinTreeNode)
    entries = queue_entry_set(scheduler.queue)
    idents = {ident for ident, _, _ in entries}
    assert node.left.identity in idents and node.right.identity in idents


def test_step_on_empty_queue_returns_false():
    root = Handle(SortedNode(np.arange(5)))
    scheduler = Scheduler(root, score_crack_sort_merge(5))
    node = root.get()
    assert not scheduler.step()
    assert root.get() is node


def test_run_to_convergence_single_sorted(rng):
    keys = distinct_keys(rng, 8)
    root = Handle(ArrayNode(keys))
    before = contents(root.get())
    steps, converged = run_to_convergence(root, score_crack_sort_merge(4))
    assert converged
    final = root.get()
    assert isinstance(final, SortedNode)
    assert is_structurally_correct(final)
    assert contents(final) == before


def test_run_to_convergence_already_converged():
    root = Handle(SortedNode(np.arange(32)))
    steps, converged = run_to_convergence(root, score_crack_sort_merge(4))
    assert (steps, converged) == (0, True)


def test_run_to_convergence_single_sort_when_theta_exceeds_n(rng):
    root = Handle(ArrayNode(distinct_keys(rng, 50)))
    steps, converged = run_to_convergence(root, score_crack_sort_merge(51))
    assert (steps, converged) == (1, True)
    assert isinstance(root.get(), SortedNode)


def test_run_to_convergence_respects_step_budget(rng):
    root = Handle(ArrayNode(distinct_keys(rng, 4096)))
    steps, converged = run_to_convergence(root, score_crack_sort_merge(4), max_steps=3)
    assert steps == 3 and not converged


def test_convergence_bound_on_random_arrays(rng):
    for _ in range(10):
        n = int(rng.integers(2, 4000))
        theta = int(rng.integers(2, 64))
        root = Handle(ArrayNode(rng.integers(-(2**40), 2**40, size=n).astype(np.int64)))
        steps, converged = run_to_convergence(root, score_crack_sort_merge(theta))
        assert converged
        ratio = n / theta + 1
        assert steps <= 10 * ratio * (np.log2(ratio) + 2)


def test_trace_lengths_and_equivalence(rng):
    node = ArrayNode(distinct_keys(rng, 64))
    snapshots = trace(node, score_crack_sort_merge(8), 5)
    assert len(snapshots) == 6
    for a, b in zip(snapshots, snapshots[1:]):
        assert logically_equivalent(a, b)


def test_trace_zero_steps():
    node = ArrayNode([3, 1])
    snapshots = trace(node, score_crack_sort_merge(8), 0)
    assert len(snapshots) == 1
    assert isinstance(node, ArrayNode)  # input untouched


def test_trace_converged_instance_is_fixed_point():
    node = SortedNode(np.arange(10))
    snapshots = trace(node, score_crack_sort_merge(4), 3)
    for snap in snapshots:
        assert isinstance(snap, SortedNode)
        assert snap.keys.tolist() == list(range(10))


# -- incremental maintenance vs from-scratch oracle --------------------------------


def _converge_with_oracle_checks(rng, node, theta, max_steps=400):
    root = Handle(node)
    score = score_crack_sort_merge(theta)
    scheduler = Scheduler(root, score)
    bag_before = contents(root.get())
    prev_targets = weighted_targets(root, score)
    steps = 0
    while steps < max_steps:
        if not scheduler.step():
            break
        steps += 1
        assert queue_entry_set(scheduler.queue) == queue_entry_set(build_queue(root, score))
        cur_targets = weighted_targets(root, score)
        assert bag_symmetric_difference(prev_targets, cur_targets) <= 4 * len(ATOMICS)
        prev_targets = cur_targets
    assert contents(root.get()) == bag_before
    return steps


def test_incremental_queue_matches_oracle_random_instances(rng):
    total = 0
    while total < 120:
        node = random_correct_instance(rng, max_records=150, max_depth=4)
        theta = int(rng.integers(2, 40))
        total += _converge_with_oracle_checks(rng, node, theta)


def test_incremental_queue_matches_oracle_arbitrary_instances(rng):
    total = 0
    while total < 80:
        node = random_arbitrary_instance(rng, max_depth=4)
        theta = int(rng.integers(2, 12))
        total += _converge_with_oracle_checks(rng, node, theta)


def test_scheduler_sync_root_picks_up_new_handles(rng):
    root = Handle(ArrayNode(distinct_keys(rng, 40)))
    scheduler = Scheduler(root, score_crack_sort_merge(8))
    while scheduler.step():
        pass
    assert isinstance(root.get(), SortedNode)
    # A wholesale root replacement, as an updater would do.
    batch = Handle(ArrayNode(distinct_keys(rng, 16)))
    new_root = Handle(ConcatNode(root, batch))
    scheduler.sync_root(new_root)
    score = score_crack_sort_merge(8)
    assert queue_entry_set(scheduler.queue) == queue_entry_set(build_queue(new_root, score))
    while scheduler.step():
        pass
    assert isinstance(new_root.get(), SortedNode)
    assert new_root.get().n == 56


def test_notify_dirty_rescore_after_external_swap(rng):
    left = Handle(ArrayNode(distinct_keys(rng, 6)))
    right = Handle(SortedNode(np.arange(4)))
    sep = 1000
    right.swap(SortedNode(np.arange(sep, sep + 4)))
    root = Handle(BinTreeNode(sep, left, right))
    scheduler = Scheduler(root, score_crack_sort_merge(100))
    # An ordered scan sorts the left leaf behind the scheduler's back.
    sorted_left = apply_atomic(Atomic.SORT, left.get())
    left.swap(sorted_left)
    scheduler.notify_dirty(left)
    score = score_crack_sort_merge(100)
    assert not scheduler.converged  # dirty report pending
    while scheduler.step():
        pass
    assert isinstance(root.get(), SortedNode)  # merge happened after rescore
    assert scheduler.converged
