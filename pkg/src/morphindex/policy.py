"""Scoring policies and the incremental reorganization scheduler.

A scoring function rates (atomic transform, node) pairs with a nonnegative
integer; zero means "not worth doing" and is mandatory whenever the
transform would leave the node unchanged.  Scores must be local: they may
inspect the node itself and its direct children (kinds, leaf lengths,
separators) but never ancestors or deeper descendants.  That locality is
what lets the scheduler keep its priority queue in sync by rescoring only
the swapped handle, the handles the rewrite created or destroyed, and the
swapped handle's parent.

The scheduler is generic over the node family: the data-free simulator
drives the exact same code with its lightweight nodes by supplying its own
apply function, which is also what makes simulated and real transform
sequences directly comparable.
"""

from __future__ import annotations

import heapq
import time
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

from .core import Handle, children, clone_instance
from .transforms import ATOMICS, Atomic, apply_atomic

ScoringFunction = Callable[[Atomic, object], int]


def score_crack_sort_merge(theta: int) -> ScoringFunction:
    """Threshold policy: sort small arrays, crack large ones, merge sorted runs.

    Arrays shorter than ``theta`` are sorted outright; arrays at or above
    it are cracked into a BinTree.  Once both children of an inner node are
    sorted leaves they are merged, preferring the largest merge first, so a
    run converges to a single sorted leaf.  Scores equal the record count
    involved, which prefers larger instances over smaller ones.
    """
    if theta < 2:
        raise ValueError("theta must be at least 2")

    def score(t: Atomic, node) -> int:
        kind = node.kind
        if kind == "array":
            n = node.n
            if t is Atomic.SORT and 0 < n < theta:
                return n
            if t is Atomic.CRACK and n >= theta and node.has_distinct_keys:
                return n
        elif t is Atomic.MERGE and kind in ("concat", "bintree"):
            left = node.left.get()
            right = node.right.get()
            if left.kind == "sorted" and right.kind == "sorted":
                return left.n + right.n
        return 0

    return score


@dataclass(slots=True)
class TargetEntry:
    handle: Handle
    generation: int
    atomic: Atomic
    score: int


class PolicyQueue:
    """Max-priority queue of at most one positive-score entry per handle.

    Ties break toward the smaller handle identity for reproducible runs.
    Replaced and removed entries are dropped lazily on pop.
    """

    def __init__(self):
        self._heap: list[tuple[int, int, TargetEntry]] = []
        self._current: dict[int, TargetEntry] = {}

    def __len__(self) -> int:
        return len(self._current)

    def set(self, entry: TargetEntry) -> None:
        if entry.score <= 0:
            self.discard(entry.handle.identity)
            return
        self._current[entry.handle.identity] = entry
        heapq.heappush(self._heap, (-entry.score, entry.handle.identity, entry))

    def discard(self, identity: int) -> None:
        self._current.pop(identity, None)

    def pop(self) -> Optional[TargetEntry]:
        while self._heap:
            _, identity, entry = heapq.heappop(self._heap)
            if self._current.get(identity) is entry:
                del self._current[identity]
                return entry
        return None

    def entries(self) -> list[TargetEntry]:
        return list(self._current.values())


_SCORED_ATOMICS = tuple(t for t in ATOMICS if t is not Atomic.IDENTITY)


def best_entry(handle: Handle, node, score: ScoringFunction) -> Optional[TargetEntry]:
    """Highest-scoring transform for a handle, or None when all score zero.

    Atomics are tried in a fixed order and ties keep the earliest, so the
    choice is deterministic.  The identity is excluded up front: it cannot
    change a node, so the scoring constraint pins it to zero.
    """
    best_t = None
    best_s = 0
    for t in _SCORED_ATOMICS:
        s = score(t, node)
        if s > best_s:
            best_t = t
            best_s = s
    if best_t is None:
        return None
    return TargetEntry(handle, handle.generation, best_t, best_s)


def build_queue(root: Handle, score: ScoringFunction) -> PolicyQueue:
    """Score every reachable handle from scratch; one pass, best entry each."""
    queue = PolicyQueue()
    stack = [root]
    while stack:
        h = stack.pop()
        node = h.get()
        entry = best_entry(h, node, score)
        if entry is not None:
            queue.set(entry)
        for ch in children(node):
            stack.append(ch)
    return queue


@dataclass(slots=True)
class StepInfo:
    """What one scheduler step did, for tracing and cost accounting."""

    atomic: Atomic
    handle: Handle
    old_node: object
    new_node: object
    created: list
    destroyed: list


class Scheduler:
    """Owns the priority queue and applies one transform per step.

    Single-owner: all methods except :meth:`notify_dirty` must be called
    from one thread (the background worker, or the benchmark loop in
    synchronous mode).  Handle swaps themselves are safe against concurrent
    readers; ``notify_dirty`` lets readers report their own logical-
    equivalence swaps (the forced sorts of ordered iterators) so affected
    scores are refreshed before the next step.
    """

    def __init__(self, root: Handle, score: ScoringFunction, apply_fn=apply_atomic):
        self.score = score
        self.apply_fn = apply_fn
        self.queue = PolicyQueue()
        self.parents: dict[int, Handle] = {}
        self._known: set[int] = set()
        self._dirty: deque[Handle] = deque()
        self.steps = 0
        self.root = root
        self._add_subtree(root)

    # -- bookkeeping ------------------------------------------------------

    def _add_subtree(self, top: Handle) -> None:
        stack = [top]
        while stack:
            h = stack.pop()
            if h.identity in self._known:
                continue
            self._known.add(h.identity)
            node = h.get()
            self._rescore(h, node)
            for ch in children(node):
                self.parents[ch.identity] = h
                stack.append(ch)

    def _rescore(self, handle: Handle, node) -> None:
        entry = best_entry(handle, node, self.score)
        if entry is None:
            self.queue.discard(handle.identity)
        else:
            self.queue.set(entry)

    def _forget(self, handle: Handle) -> None:
        self.queue.discard(handle.identity)
        self.parents.pop(handle.identity, None)
        self._known.discard(handle.identity)

    def _relink(self, h: Handle, old_node, new_node) -> tuple[list, list]:
        """Update parent links after a swap at ``h``; returns (created, destroyed).

        New handles are discovered by walking the rewritten subtree and
        stopping at handles that already existed; old children that are no
        longer encountered were destroyed by the rewrite, along with any
        children still claiming them as parent.
        """
        if not children(old_node) and not children(new_node):
            return [], []  # leaf relabel (e.g. a sort): no links moved
        created: list[Handle] = []
        encountered: set[int] = set()
        stack = [(h, new_node)]
        while stack:
            owner, node = stack.pop()
            for ch in children(node):
                fresh = ch.identity not in self._known
                self.parents[ch.identity] = owner
                if fresh:
                    self._known.add(ch.identity)
                    created.append(ch)
                    stack.append((ch, ch.get()))
                else:
                    encountered.add(ch.identity)
        destroyed: list[Handle] = []
        drop = [ch for ch in children(old_node) if ch.identity not in encountered]
        while drop:
            d = drop.pop()
            destroyed.append(d)
            self._forget(d)
            for ch in children(d.get()):
                if self.parents.get(ch.identity) is d:
                    drop.append(ch)
        return created, destroyed

    def sync_root(self, new_root: Handle) -> None:
        """Adopt a replaced root handle, scoring the handles it introduced."""
        if new_root is self.root:
            return
        self.root = new_root
        self._add_subtree(new_root)

    def notify_dirty(self, handle: Handle) -> None:
        """Report an external logical-equivalence swap (thread-safe)."""
        self._dirty.append(handle)

    def _drain_dirty(self) -> None:
        while self._dirty:
            h = self._dirty.popleft()
            if h.identity not in self._known:
                continue
            self._rescore(h, h.get())
            parent = self.parents.get(h.identity)
            if parent is not None and parent.identity in self._known:
                self._rescore(parent, parent.get())

    # -- stepping ---------------------------------------------------------

    def step_info(self) -> Optional[StepInfo]:
        """Apply the highest-scoring transform; None when converged."""
        self._drain_dirty()
        while True:
            entry = self.queue.pop()
            if entry is None:
                return None
            h = entry.handle
            if h.identity not in self._known:
                continue
            node = h.get()
            if entry.generation != h.generation:
                # Swapped since scoring (e.g. a reader's forced sort).
                self._rescore(h, node)
                continue
            new_node = self.apply_fn(entry.atomic, node)
            if new_node is node:
                # A score broke the score>0 => changes-node constraint.
                # Dropping the popped entry (not rescoring) guarantees the
                # loop cannot spin on the same offender.
                continue
            if not h.compare_and_swap(node, new_node):
                self._rescore(h, h.get())
                continue
            created, destroyed = self._relink(h, node, new_node)
            for c in created:
                self._rescore(c, c.get())
            self._rescore(h, new_node)
            parent = self.parents.get(h.identity)
            if parent is not None:
                self._rescore(parent, parent.get())
            self.steps += 1
            return StepInfo(entry.atomic, h, node, new_node, created, destroyed)

    def step(self) -> bool:
        return self.step_info() is not None

    @property
    def converged(self) -> bool:
        # Non-mutating so other threads may poll it; pending dirty reports
        # count as work because draining them can surface new entries.
        return len(self.queue) == 0 and not self._dirty


def run_to_convergence(
    root: Handle,
    score: ScoringFunction,
    max_steps: Optional[int] = None,
    max_seconds: Optional[float] = None,
) -> tuple[int, bool]:
    """Step until no positive-score transform remains or a budget runs out.

    Returns (steps taken, converged flag).
    """
    scheduler = Scheduler(root, score)
    deadline = None if max_seconds is None else time.perf_counter() + max_seconds
    steps = 0
    while True:
        if max_steps is not None and steps >= max_steps:
            return steps, False
        if deadline is not None and time.perf_counter() > deadline:
            return steps, False
        if not scheduler.step():
            return steps, True
        steps += 1


def trace(root, score: ScoringFunction, k: int) -> list:
    """Snapshots [C_0 .. C_k] of k scheduler steps from a copy of ``root``.

    Each snapshot is a frozen deep copy, unaffected by later steps.  Once
    the policy converges the remaining snapshots repeat the fixed point.
    """
    work = Handle(clone_instance(root))
    scheduler = Scheduler(work, score)
    snapshots = [clone_instance(work.get())]
    for _ in range(k):
        scheduler.step()
        snapshots.append(clone_instance(work.get()))
    return snapshots
