"""Physical building blocks of the index.

An index instance is a binary tree assembled from four node kinds:

* ``ArrayNode``    -- leaf holding records in arbitrary order
* ``SortedNode``   -- leaf holding records in nondecreasing key order
* ``ConcatNode``   -- inner node gluing two subtrees together
* ``BinTreeNode``  -- inner node partitioning its subtrees by a separator key

Records are (key, value) pairs of 8-byte signed integers; keys may repeat.
Leaves store their records as a pair of parallel ``int64`` arrays so that
scans, searches, and reorganizations run at numpy speed.

Nodes are physically immutable once constructed.  Inner nodes reference
their children through ``Handle`` indirection cells: a handle's target may
be swapped at any time, but only for a node with identical logical
contents.  That contract is what lets a background thread reorganize the
tree while readers traverse it without locks.
"""

from __future__ import annotations

import itertools
import threading
from typing import Iterable, Iterator, NamedTuple, Union

import numpy as np

KEY_MIN = -(2**63)
KEY_MAX = 2**63 - 1


class Record(NamedTuple):
    key: int
    value: int


def _as_int64(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError("record columns must be one-dimensional")
    return arr


class _Leaf:
    """Shared storage for the two leaf kinds."""

    __slots__ = ("keys", "values", "_distinct")

    def __init__(self, keys=(), values=None):
        self.keys = _as_int64(keys)
        if values is None:
            self.values = np.zeros(len(self.keys), dtype=np.int64)
        else:
            self.values = _as_int64(values)
            if len(self.values) != len(self.keys):
                raise ValueError("keys and values differ in length")
        self._distinct: bool | None = None

    @property
    def n(self) -> int:
        return len(self.keys)

    @property
    def has_distinct_keys(self) -> bool:
        """True when the leaf holds at least two distinct keys (cached)."""
        if self._distinct is None:
            n = self.n
            if n <= 1:
                self._distinct = False
            elif int(self.keys[0]) != int(self.keys[n // 2]):
                # O(1) fast path; a full scan only runs on near-duplicate data.
                self._distinct = True
            else:
                self._distinct = int(self.keys.min()) != int(self.keys.max())
        return self._distinct

    def records(self) -> Iterator[Record]:
        for k, v in zip(self.keys.tolist(), self.values.tolist()):
            yield Record(k, v)

    @classmethod
    def from_records(cls, records: Iterable[tuple[int, int]]):
        pairs = list(records)
        keys = [k for k, _ in pairs]
        values = [v for _, v in pairs]
        return cls(keys, values)

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n})"


class ArrayNode(_Leaf):
    kind = "array"
    __slots__ = ()


class SortedNode(_Leaf):
    kind = "sorted"
    __slots__ = ()


_handle_ids = itertools.count()


class Handle:
    """Swappable indirection cell with a stable identity.

    Readers call :meth:`get` without synchronization and observe either the
    old or the new target, never a torn state.  Writers must only install
    targets that are logically equivalent to the current one (the root
    handle, replaced wholesale by the updater, is the single exception).
    The generation counter increments on every swap so schedulers can
    detect entries computed against a stale target.
    """

    __slots__ = ("_target", "identity", "generation", "_lock")

    def __init__(self, target):
        self._target = target
        self.identity = next(_handle_ids)
        self.generation = 0
        self._lock = threading.Lock()

    def get(self):
        return self._target

    def swap(self, node) -> None:
        with self._lock:
            self._target = node
            self.generation += 1

    def compare_and_swap(self, expected, node) -> bool:
        """Install ``node`` only if the current target is ``expected``."""
        with self._lock:
            if self._target is not expected:
                return False
            self._target = node
            self.generation += 1
            return True

    def __repr__(self):
        return f"Handle(id={self.identity}, -> {self._target!r})"


class _Inner:
    __slots__ = ("left", "right")

    def __init__(self, left, right):
        self.left = left if isinstance(left, Handle) else Handle(left)
        self.right = right if isinstance(right, Handle) else Handle(right)


class ConcatNode(_Inner):
    kind = "concat"
    __slots__ = ()

    def __repr__(self):
        return "ConcatNode"


class BinTreeNode(_Inner):
    kind = "bintree"
    __slots__ = ("separator",)

    def __init__(self, separator: int, left, right):
        super().__init__(left, right)
        self.separator = int(separator)

    def __repr__(self):
        return f"BinTreeNode(sep={self.separator})"


Node = Union[ArrayNode, SortedNode, ConcatNode, BinTreeNode]

LEAF_KINDS = ("array", "sorted")


def is_leaf(node) -> bool:
    return isinstance(node, _Leaf)


def is_inner(node) -> bool:
    return isinstance(node, _Inner)


def children(node) -> tuple[Handle, ...]:
    # Kind-based so it also covers the simulator's lightweight nodes.
    if node.kind in ("concat", "bintree"):
        return (node.left, node.right)
    return ()


class Bag:
    """Multiset of records, canonicalized for order-insensitive equality.

    Equality is multiplicity-sensitive: the canonical form sorts records by
    (key, value), so two bags compare equal exactly when they contain the
    same records the same number of times.
    """

    __slots__ = ("keys", "values")

    def __init__(self, keys, values):
        keys = _as_int64(keys)
        values = _as_int64(values)
        order = np.lexsort((values, keys))
        self.keys = keys[order]
        self.values = values[order]

    def __len__(self) -> int:
        return len(self.keys)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Bag):
            return NotImplemented
        return np.array_equal(self.keys, other.keys) and np.array_equal(
            self.values, other.values
        )

    def __hash__(self):
        raise TypeError("Bag is unhashable")

    def records(self) -> Iterator[Record]:
        for k, v in zip(self.keys.tolist(), self.values.tolist()):
            yield Record(k, v)

    def __repr__(self):
        return f"Bag(n={len(self)})"

    @classmethod
    def of(cls, records: Iterable[tuple[int, int]]) -> "Bag":
        pairs = list(records)
        return cls([k for k, _ in pairs], [v for _, v in pairs])


def iter_leaves(node) -> Iterator[_Leaf]:
    """Yield leaf nodes left to right, dereferencing each handle once."""
    stack = [node]
    while stack:
        cur = stack.pop()
        if isinstance(cur, _Leaf):
            yield cur
        else:
            stack.append(cur.right.get())
            stack.append(cur.left.get())


def contents(node) -> Bag:
    """The logical contents of an instance: the bag of records it stores."""
    key_parts = []
    val_parts = []
    for leaf in iter_leaves(node):
        key_parts.append(leaf.keys)
        val_parts.append(leaf.values)
    if not key_parts:
        return Bag([], [])
    return Bag(np.concatenate(key_parts), np.concatenate(val_parts))


def record_count(node) -> int:
    return sum(leaf.n for leaf in iter_leaves(node))


def logically_equivalent(a, b) -> bool:
    return contents(a) == contents(b)


def descendants(node) -> list:
    """The instance plus every node reachable through its children.

    Returned as a list because instances are bags of nodes: the same node
    object may be reachable more than once and each occurrence counts.
    """
    out = []
    stack = [node]
    while stack:
        cur = stack.pop()
        out.append(cur)
        if isinstance(cur, _Inner):
            stack.append(cur.left.get())
            stack.append(cur.right.get())
    return out


def walk_handles(root: Handle) -> Iterator[tuple[Handle, Node]]:
    """Yield (handle, current target) for every handle reachable from root."""
    stack = [root]
    while stack:
        h = stack.pop()
        node = h.get()
        yield h, node
        if isinstance(node, _Inner):
            stack.append(node.right)
            stack.append(node.left)


def _leaf_check(node) -> tuple[bool, int | None, int | None]:
    if node.n == 0:
        return True, None, None
    if isinstance(node, SortedNode):
        ordered = bool(np.all(node.keys[:-1] <= node.keys[1:]))
        return ordered, int(node.keys[0]), int(node.keys[-1])
    return True, int(node.keys.min()), int(node.keys.max())


def _check(node) -> tuple[bool, int | None, int | None]:
    """Structural check returning (correct, min key, max key).

    Explicit postorder stack: instances glued together by many un-merged
    inserts can be deeper than the interpreter's recursion limit.
    """
    work: list[tuple] = [(node, False)]
    results: list[tuple[bool, int | None, int | None]] = []
    while work:
        cur, expanded = work.pop()
        if isinstance(cur, _Leaf):
            results.append(_leaf_check(cur))
            continue
        if not expanded:
            work.append((cur, True))
            work.append((cur.right.get(), False))
            work.append((cur.left.get(), False))
            continue
        rok, rmin, rmax = results.pop()
        lok, lmin, lmax = results.pop()
        ok = lok and rok
        if isinstance(cur, BinTreeNode) and ok:
            if lmax is not None and lmax >= cur.separator:
                ok = False
            if rmin is not None and rmin < cur.separator:
                ok = False
        lo = lmin if rmin is None else (rmin if lmin is None else min(lmin, rmin))
        hi = lmax if rmax is None else (rmax if lmax is None else max(lmax, rmax))
        results.append((ok, lo, hi))
    return results[0]


def is_structurally_correct(node) -> bool:
    """Check the semantic layout constraints recursively.

    Arrays are always correct; Sorted leaves must be nondecreasing by key;
    Concat requires correct children; BinTree additionally requires every
    key on the left to be strictly below the separator and every key on the
    right to be at or above it.
    """
    return _check(node)[0]


def structurally_identical(a, b) -> bool:
    """Node-for-node equality of two instances (handles compared by target)."""
    if type(a) is not type(b):
        return False
    if isinstance(a, _Leaf):
        return np.array_equal(a.keys, b.keys) and np.array_equal(a.values, b.values)
    if isinstance(a, BinTreeNode) and a.separator != b.separator:
        return False
    return structurally_identical(a.left.get(), b.left.get()) and structurally_identical(
        a.right.get(), b.right.get()
    )


def clone_instance(node) -> Node:
    """Deep copy of an instance with fresh handles (leaf arrays are shared)."""
    if isinstance(node, ArrayNode):
        return ArrayNode(node.keys, node.values)
    if isinstance(node, SortedNode):
        return SortedNode(node.keys, node.values)
    left = Handle(clone_instance(node.left.get()))
    right = Handle(clone_instance(node.right.get()))
    if isinstance(node, BinTreeNode):
        return BinTreeNode(node.separator, left, right)
    return ConcatNode(left, right)
