"""The public index: access paths, batch inserts, and the background worker.

Concurrency model: any number of reader threads, one background worker,
and one updater thread may run at once.  Readers never take locks; they
pin node references (physically immutable) and dereference each handle at
most once per traversal, so every read is consistent with the instance's
contents at some instant.  The worker only swaps handle targets for
logically equivalent nodes, so it never changes what readers see, only how
fast they see it.  The updater replaces the root handle wholesale with a
Concat of the old root handle and the new batch, which keeps in-flight
optimizations below the old root effective.

Ordered iterators are the one reader that writes: hitting an unsorted leaf
forces a sort through the same logical-equivalence swap contract.  If the
worker races them on that handle the swap is retried once against the new
target, then falls back to sorting a private copy; successful swaps are
reported to the scheduler so its scores stay fresh.
"""

from __future__ import annotations

import heapq
import threading
import time
from bisect import bisect_left
from typing import Iterator, Optional

import numpy as np

from .core import (
    ArrayNode,
    Bag,
    BinTreeNode,
    ConcatNode,
    Handle,
    Node,
    Record,
    SortedNode,
    contents,
    record_count,
)
from .policy import Scheduler, ScoringFunction, score_crack_sort_merge
from .transforms import sort_leaf

DEFAULT_THETA = 1024


# -- point lookup -------------------------------------------------------------


def get_record(node: Node, key: int) -> Optional[Record]:
    """First record with ``key`` under left-to-right, separator-directed search.

    Iterative (explicit backlog of right siblings), so arbitrarily long
    glue chains from many un-merged inserts cannot exhaust the stack.
    """
    pending: list = []
    while True:
        if isinstance(node, ArrayNode):
            hits = np.nonzero(node.keys == key)[0]
            if len(hits):
                i = int(hits[0])
                return Record(int(node.keys[i]), int(node.values[i]))
        elif isinstance(node, SortedNode):
            i = int(np.searchsorted(node.keys, key, side="left"))
            if i < node.n and int(node.keys[i]) == key:
                return Record(int(node.keys[i]), int(node.values[i]))
        elif isinstance(node, BinTreeNode):
            node = (node.right if node.separator <= key else node.left).get()
            continue
        else:
            pending.append(node.right)
            node = node.left.get()
            continue
        if not pending:
            return None
        node = pending.pop().get()


# -- unordered iteration -------------------------------------------------------


def _scan(node: Node, lower: Optional[int]) -> Iterator[Record]:
    stack = [node]
    while stack:
        cur = stack.pop()
        if isinstance(cur, ArrayNode):
            keys = cur.keys
            values = cur.values
            if lower is not None:
                pick = keys >= lower
                keys = keys[pick]
                values = values[pick]
            for k, v in zip(keys.tolist(), values.tolist()):
                yield Record(k, v)
        elif isinstance(cur, SortedNode):
            start = 0 if lower is None else int(np.searchsorted(cur.keys, lower, side="left"))
            for k, v in zip(cur.keys[start:].tolist(), cur.values[start:].tolist()):
                yield Record(k, v)
        elif isinstance(cur, BinTreeNode) and lower is not None and lower >= cur.separator:
            stack.append(cur.right.get())  # left subtree is entirely below the bound
        else:
            stack.append(cur.right.get())
            stack.append(cur.left.get())


# -- ordered iteration ---------------------------------------------------------
#
# Cursors produce sorted (keys, values) runs rather than single records so
# that merging stays in numpy.  Runs are nonempty; None means exhausted.


def _force_sorted(handle: Handle, node: ArrayNode, notify) -> Node:
    replacement = sort_leaf(node)
    if handle.compare_and_swap(node, replacement):
        notify(handle)
        return replacement
    fresh = handle.get()
    if isinstance(fresh, ArrayNode):
        replacement = sort_leaf(fresh)
        if handle.compare_and_swap(fresh, replacement):
            notify(handle)
            return replacement
        fresh = handle.get()
        if isinstance(fresh, ArrayNode):
            # Two lost races in a row; give up on sharing and sort privately.
            return sort_leaf(fresh)
    return fresh


class _LeafRuns:
    __slots__ = ("keys", "values", "pos")

    def __init__(self, node: SortedNode):
        self.keys = node.keys
        self.values = node.values
        self.pos = 0

    def next_run(self):
        if self.pos >= len(self.keys):
            return None
        run = (self.keys[self.pos :], self.values[self.pos :])
        self.pos = len(self.keys)
        return run

    def seek(self, key: int) -> None:
        self.pos = max(self.pos, int(np.searchsorted(self.keys, key, side="left")))


class _ChainRuns:
    """In-order traversal of a partition node; children loaded lazily."""

    __slots__ = ("separator", "_left_handle", "_right_handle", "_left", "_right", "_notify", "_on_left")

    def __init__(self, node: BinTreeNode, notify):
        self.separator = node.separator
        self._left_handle = node.left
        self._right_handle = node.right
        self._left = None
        self._right = None
        self._notify = notify
        self._on_left = True

    def _left_runs(self):
        if self._left is None:
            self._left = _make_runs(self._left_handle, self._notify)
        return self._left

    def _right_runs(self):
        if self._right is None:
            self._right = _make_runs(self._right_handle, self._notify)
        return self._right

    def next_run(self):
        if self._on_left:
            run = self._left_runs().next_run()
            if run is not None:
                return run
            self._on_left = False
            self._left = None
        return self._right_runs().next_run()

    def seek(self, key: int) -> None:
        if key >= self.separator:
            # Everything on the left is below the separator; skip it whole.
            self._on_left = False
            self._left = None
            self._right_runs().seek(key)
        elif self._on_left:
            self._left_runs().seek(key)
        # else: already on the right, whose keys are all >= separator > key.


class _KWayRuns:
    """Heap merge of child run streams; earlier (left) sources win ties.

    A glue chain grows one level per insert batch, so the maximal chain is
    flattened into one k-way merge rather than nested two-way merges whose
    call depth would track the chain length.
    """

    __slots__ = ("_sources", "_notify", "_heap", "_filled", "_pending_seek")

    def __init__(self, handles, notify):
        self._sources = list(handles)
        self._notify = notify
        self._heap: list = []
        self._filled = False
        self._pending_seek = None

    def _push(self, index: int, source, run) -> None:
        if run is not None:
            heapq.heappush(self._heap, (int(run[0][0]), index, run, source))

    def _fill(self) -> None:
        if self._filled:
            return
        self._filled = True
        for index, handle in enumerate(self._sources):
            source = _make_runs(handle, self._notify)
            if self._pending_seek is not None:
                source.seek(self._pending_seek)
            self._push(index, source, source.next_run())
        self._pending_seek = None

    def next_run(self):
        self._fill()
        if not self._heap:
            return None
        _, index, run, source = heapq.heappop(self._heap)
        if not self._heap:
            self._push(index, source, source.next_run())
            return run
        next_key, next_index = self._heap[0][0], self._heap[0][1]
        keys = run[0]
        last = int(keys[-1])
        if last < next_key or (last == next_key and index < next_index):
            self._push(index, source, source.next_run())
            return run
        # Emit the prefix that precedes the next head; ties go to the
        # earlier source, keeping the merge stable left to right.
        side = "right" if index < next_index else "left"
        cut = int(np.searchsorted(keys, next_key, side=side))
        out = (keys[:cut], run[1][:cut])
        rest = (keys[cut:], run[1][cut:])
        if len(rest[0]):
            heapq.heappush(self._heap, (int(rest[0][0]), index, rest, source))
        else:
            self._push(index, source, source.next_run())
        return out

    def seek(self, key: int) -> None:
        if not self._filled:
            self._pending_seek = key if self._pending_seek is None else max(
                self._pending_seek, key)
            return
        entries = []
        while self._heap:
            entries.append(heapq.heappop(self._heap))
        for _, index, run, source in entries:
            source.seek(key)
            cut = int(np.searchsorted(run[0], key, side="left"))
            if cut < len(run[0]):
                rest = (run[0][cut:], run[1][cut:])
            else:
                rest = source.next_run()
            self._push(index, source, rest)


def _concat_sources(node: ConcatNode) -> list[Handle]:
    """Child handles of a maximal glue chain, left to right."""
    sources: list[Handle] = []
    stack = [node.right, node.left]
    while stack:
        handle = stack.pop()
        target = handle.get()
        if isinstance(target, ConcatNode):
            stack.append(target.right)
            stack.append(target.left)
        else:
            sources.append(handle)
    return sources


def _make_runs(handle: Handle, notify):
    node = handle.get()
    while isinstance(node, ArrayNode):
        node = _force_sorted(handle, node, notify)
    if isinstance(node, SortedNode):
        return _LeafRuns(node)
    if isinstance(node, BinTreeNode):
        return _ChainRuns(node, notify)
    return _KWayRuns(_concat_sources(node), notify)


class OrderedIterator:
    """Iterator over a pinned snapshot in nondecreasing key order.

    ``seek(key)`` advances (forward only) to the first record with
    ``record.key >= key``.
    """

    def __init__(self, source, lower: Optional[int] = None):
        self._source = source
        self._keys: list[int] = []
        self._values: list[int] = []
        self._pos = 0
        if lower is not None:
            self._source.seek(lower)

    def __iter__(self) -> "OrderedIterator":
        return self

    def __next__(self) -> Record:
        while self._pos >= len(self._keys):
            run = self._source.next_run()
            if run is None:
                raise StopIteration
            self._keys = run[0].tolist()
            self._values = run[1].tolist()
            self._pos = 0
        rec = Record(self._keys[self._pos], self._values[self._pos])
        self._pos += 1
        return rec

    def seek(self, key: int) -> None:
        if self._pos < len(self._keys):
            if self._keys[-1] >= key:
                self._pos = max(self._pos, bisect_left(self._keys, key, self._pos))
                return
            self._keys = []
            self._pos = 0
        self._source.seek(key)


# -- the index -----------------------------------------------------------------


class _Worker(threading.Thread):
    """Loops {sync root, pop, apply} until converged, then idles."""

    def __init__(self, index: "Index"):
        super().__init__(name="morphindex-worker", daemon=True)
        self._index = index
        # Names avoid clobbering threading.Thread internals (e.g. _stop).
        self._halt = threading.Event()
        self._pause_flag = threading.Event()
        self._parked = threading.Event()
        # Set only while the worker is idle with nothing left to apply; the
        # queue can look empty mid-step, so pollers must not infer
        # convergence from scheduler state while the worker runs.
        self.converged_event = threading.Event()

    def run(self) -> None:
        index = self._index
        scheduler = index.scheduler
        while not self._halt.is_set():
            if self._pause_flag.is_set():
                self._parked.set()
                time.sleep(0.001)
                continue
            self._parked.clear()
            if index.root is not scheduler.root:
                self.converged_event.clear()
                scheduler.sync_root(index.root)
                continue
            if not scheduler.converged:
                self.converged_event.clear()
                scheduler.step()
                continue
            self.converged_event.set()
            time.sleep(0.001)

    def pause(self) -> None:
        self._pause_flag.set()
        if self.is_alive():
            self._parked.wait(timeout=60.0)

    def resume(self) -> None:
        self._parked.clear()
        self._pause_flag.clear()

    def stop(self) -> None:
        self._halt.set()
        self._pause_flag.clear()
        if self.is_alive():
            self.join(timeout=60.0)


class Index:
    """Adaptive key-value index over 8-byte integer keys and values.

    The physical layout starts as a single unsorted leaf and is reorganized
    incrementally, either by the background worker (:meth:`start_worker`)
    or by explicit synchronous stepping (:meth:`step_batch`).  Lookups and
    scans work at every intermediate state.

    Only one thread may insert at a time; the embedding application owns
    that arbitration.
    """

    def __init__(self, keys=(), values=None, *, theta: int = DEFAULT_THETA,
                 score: Optional[ScoringFunction] = None):
        self._init_from_node(ArrayNode(keys, values), theta, score)

    @classmethod
    def from_node(cls, node: Node, *, theta: int = DEFAULT_THETA,
                  score: Optional[ScoringFunction] = None) -> "Index":
        """Wrap an existing instance; it must be structurally correct."""
        index = cls.__new__(cls)
        index._init_from_node(node, theta, score)
        return index

    def _init_from_node(self, node: Node, theta: int, score: Optional[ScoringFunction]):
        self.theta = theta
        self.root = Handle(node)
        self.scheduler = Scheduler(self.root, score or score_crack_sort_merge(theta))
        self._worker: Optional[_Worker] = None

    # -- access paths ---------------------------------------------------

    def get(self, key: int) -> Optional[Record]:
        return get_record(self.root.get(), key)

    def iterator(self, lower: Optional[int] = None) -> Iterator[Record]:
        """Unordered scan of records with key >= lower (all records when None).

        Snapshot semantics: records inserted after creation are not seen.
        """
        snapshot = self.root.get()
        return _scan(snapshot, lower)

    def ordered_iterator(self, lower: Optional[int] = None) -> OrderedIterator:
        """Ordered scan of records with key >= lower; supports ``seek``."""
        source = _make_runs(self.root, self._notify_swap)
        return OrderedIterator(source, lower)

    def _notify_swap(self, handle: Handle) -> None:
        self.scheduler.notify_dirty(handle)

    # -- updates ---------------------------------------------------------

    def insert(self, keys, values=None) -> None:
        """Append a batch of records; O(1) beyond copying the batch.

        The old root handle becomes the left child of the new root, so
        reorganization already applied to it carries over.
        """
        batch = ArrayNode(keys, values)
        if batch.n == 0:
            return
        self.root = Handle(ConcatNode(self.root, Handle(batch)))

    # -- reorganization --------------------------------------------------

    def step_batch(self, max_steps: int) -> int:
        """Apply up to ``max_steps`` scheduler steps synchronously."""
        if self._worker is not None and self._worker.is_alive():
            raise RuntimeError("synchronous stepping requires the worker to be stopped")
        scheduler = self.scheduler
        if self.root is not scheduler.root:
            scheduler.sync_root(self.root)
        done = 0
        while done < max_steps and scheduler.step():
            done += 1
        return done

    @property
    def converged(self) -> bool:
        scheduler = self.scheduler
        worker = self._worker
        if worker is not None and worker.is_alive() and not worker.converged_event.is_set():
            return False
        return self.root is scheduler.root and scheduler.converged

    def run_to_convergence(self, max_steps: Optional[int] = None,
                           max_seconds: Optional[float] = None) -> tuple[int, bool]:
        """Synchronously reorganize until no positive-score transform remains.

        Budgets are enforced between batches of 64 steps, so a time budget
        may overshoot by at most one batch.
        """
        deadline = None if max_seconds is None else time.perf_counter() + max_seconds
        steps = 0
        while True:
            batch = 64 if max_steps is None else min(64, max_steps - steps)
            if batch <= 0:
                return steps, False
            if deadline is not None and time.perf_counter() > deadline:
                return steps, False
            done = self.step_batch(batch)
            steps += done
            if done < batch:
                return steps, self.converged

    # -- worker control ----------------------------------------------------

    def start_worker(self) -> None:
        if self._worker is not None and self._worker.is_alive():
            return
        self._worker = _Worker(self)
        self._worker.start()

    def pause_worker(self) -> None:
        if self._worker is not None:
            self._worker.pause()

    def resume_worker(self) -> None:
        if self._worker is not None:
            self._worker.resume()

    def stop_worker(self) -> None:
        if self._worker is not None:
            self._worker.stop()
            self._worker = None

    def wait_converged(self, timeout: float) -> bool:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if self.converged:
                return True
            time.sleep(0.002)
        return self.converged

    # -- inspection --------------------------------------------------------

    def contents(self) -> Bag:
        return contents(self.root.get())

    def record_count(self) -> int:
        return record_count(self.root.get())
