"""Data-free emulation of policy runs over a fitted cost model.

The simulator replays the scheduler against lightweight nodes that carry
only record counts, charging each applied transform its modeled cost and
tracking the predicted point-lookup latency of the evolving shape.  The
output is a sequence of status intervals: stretches of simulated time over
which predicted performance is constant, bounded by transform completions.
Utilities aggregate the intervals into a single figure of merit, and the
optimizer searches a candidate set or range of crack thresholds for the
best one.

Cost model conventions (all times in nanoseconds):

* ``alpha(n) = a*n + b``          lookup in an unsorted leaf of n records
* ``beta(n)  = a*log2(n) + b``    lookup in a sorted leaf
* ``gamma``                       one partition-node descent
* ``delta(n) = a*n + b``          cracking an n-record leaf
* ``nu(n)    = a*n*log2(n) + b``  sorting an n-record leaf

Merges and divides are charged at delta's linear shape on their output
size; relabels and rotations are charged zero, as is queue maintenance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .core import Handle
from .policy import Scheduler, ScoringFunction, score_crack_sort_merge
from .transforms import Atomic


# -- lightweight grammar ---------------------------------------------------


class LightArray:
    kind = "array"
    has_distinct_keys = True  # keys are assumed uniform, so splits always work
    __slots__ = ("n",)

    def __init__(self, n: int):
        self.n = int(n)

    @property
    def total(self) -> int:
        return self.n

    def __repr__(self):
        return f"LightArray({self.n})"


class LightSorted:
    kind = "sorted"
    __slots__ = ("n",)

    def __init__(self, n: int):
        self.n = int(n)

    @property
    def total(self) -> int:
        return self.n

    def __repr__(self):
        return f"LightSorted({self.n})"


class _LightInner:
    __slots__ = ("left", "right", "total")

    def __init__(self, left, right):
        self.left = left if isinstance(left, Handle) else Handle(left)
        self.right = right if isinstance(right, Handle) else Handle(right)
        # Record totals are invariant under every transform, so the cached
        # sum stays valid even as child handles are swapped underneath.
        self.total = self.left.get().total + self.right.get().total


class LightConcat(_LightInner):
    kind = "concat"
    __slots__ = ()


class LightBinTree(_LightInner):
    kind = "bintree"
    __slots__ = ()


LightNode = object


def clone_light(node) -> LightNode:
    if isinstance(node, LightArray):
        return LightArray(node.n)
    if isinstance(node, LightSorted):
        return LightSorted(node.n)
    left = Handle(clone_light(node.left.get()))
    right = Handle(clone_light(node.right.get()))
    return type(node)(left, right)


def light_of_sizes(*sizes: int) -> LightNode:
    """Left-deep Concat of unsorted leaves; convenience for tests."""
    nodes = [LightArray(n) for n in sizes]
    out = nodes[0]
    for nxt in nodes[1:]:
        out = LightConcat(Handle(out), Handle(nxt))
    return out


def apply_light(t: Atomic, node):
    """Size-only analogue of the real transforms.

    Crack splits evenly (floor left, ceil right), matching the real pivot
    rule on uniformly distributed keys; key-dependent guards have no
    data-free counterpart, so pivots rotate whenever the shapes match.
    """
    kind = node.kind
    if t is Atomic.SORT:
        if kind == "array":
            return LightSorted(node.n)
    elif t is Atomic.UNSORT:
        if kind == "sorted":
            return LightArray(node.n)
    elif t is Atomic.DIVIDE:
        if kind == "array" and node.n >= 2:
            half = node.n // 2
            return LightConcat(Handle(LightArray(half)), Handle(LightArray(node.n - half)))
    elif t is Atomic.CRACK:
        if kind == "array" and node.n >= 2:
            half = node.n // 2
            return LightBinTree(Handle(LightArray(half)), Handle(LightArray(node.n - half)))
    elif t is Atomic.MERGE:
        if kind in ("concat", "bintree"):
            left = node.left.get()
            right = node.right.get()
            if left.kind == "array" and right.kind == "array":
                return LightArray(left.n + right.n)
            if left.kind == "sorted" and right.kind == "sorted":
                return LightSorted(left.n + right.n)
    elif t is Atomic.PIVOT_LEFT:
        if kind in ("concat", "bintree"):
            right = node.right.get()
            if right.kind == kind:
                inner = type(node)(node.left, right.left)
                return type(node)(Handle(inner), right.right)
    elif t is Atomic.PIVOT_RIGHT:
        if kind in ("concat", "bintree"):
            left = node.left.get()
            if left.kind == kind:
                inner = type(node)(left.right, node.right)
                return type(node)(left.left, Handle(inner))
    return node


# -- cost model -------------------------------------------------------------


_SIZED_OPS = ("alpha", "beta", "delta", "nu")
_ALL_OPS = ("alpha", "beta", "gamma", "delta", "nu")


@dataclass(frozen=True)
class CostModel:
    """Fitted per-operation cost functions, nanoseconds."""

    alpha: tuple[float, float]
    beta: tuple[float, float]
    gamma: float
    delta: tuple[float, float]
    nu: tuple[float, float]

    def alpha_ns(self, n: int) -> float:
        a, b = self.alpha
        return a * n + b

    def beta_ns(self, n: int) -> float:
        a, b = self.beta
        return a * math.log2(n) + b if n >= 1 else b

    def gamma_ns(self) -> float:
        return self.gamma

    def delta_ns(self, n: int) -> float:
        a, b = self.delta
        return a * n + b

    def nu_ns(self, n: int) -> float:
        a, b = self.nu
        return a * n * math.log2(n) + b if n >= 2 else b

    def save(self, path) -> None:
        lines = [
            f"alpha {self.alpha[0]!r} {self.alpha[1]!r}",
            f"beta {self.beta[0]!r} {self.beta[1]!r}",
            f"gamma {self.gamma!r} 0.0",
            f"delta {self.delta[0]!r} {self.delta[1]!r}",
            f"nu {self.nu[0]!r} {self.nu[1]!r}",
        ]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "CostModel":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise FileNotFoundError(f"cost model file not readable: {path}") from exc
        coeffs: dict[str, tuple[float, float]] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3 or parts[0] not in _ALL_OPS:
                raise ValueError(f"corrupt cost model file {path}, line {lineno}: {line!r}")
            try:
                coeffs[parts[0]] = (float(parts[1]), float(parts[2]))
            except ValueError as exc:
                raise ValueError(
                    f"corrupt cost model file {path}, line {lineno}: {line!r}"
                ) from exc
        missing = [op for op in _ALL_OPS if op not in coeffs]
        if missing:
            raise ValueError(f"cost model file {path} is missing: {', '.join(missing)}")
        return cls(
            alpha=coeffs["alpha"],
            beta=coeffs["beta"],
            gamma=coeffs["gamma"][0],
            delta=coeffs["delta"],
            nu=coeffs["nu"],
        )


def _fit_clamped(feature: np.ndarray, observed: np.ndarray) -> tuple[float, float]:
    # Sizes span decades, so weight residuals relatively; otherwise the
    # largest measurements dominate and the intercept turns meaningless.
    weights = 1.0 / np.maximum(np.abs(observed), 1e-9)
    design = np.column_stack([feature, np.ones_like(feature)]) * weights[:, None]
    coef, *_ = np.linalg.lstsq(design, observed * weights, rcond=None)
    return (max(float(coef[0]), 0.0), max(float(coef[1]), 0.0))


def fit_cost_model(measurements: Iterable[tuple[str, int, float]]) -> CostModel:
    """Least-squares fit of each cost function to its stated shape.

    ``measurements`` holds (operation, size, observed nanoseconds) rows
    with operation one of alpha/beta/gamma/delta/nu.  Sized operations
    need at least three distinct sizes; coefficients are clamped at zero.
    """
    samples: dict[str, list[tuple[int, float]]] = {op: [] for op in _ALL_OPS}
    for op, n, ns in measurements:
        if op not in samples:
            raise ValueError(f"unknown cost-model operation: {op!r}")
        samples[op].append((int(n), float(ns)))
    for op in _SIZED_OPS:
        distinct = {n for n, _ in samples[op]}
        if len(distinct) < 3:
            raise ValueError(f"operation {op!r} needs measurements at >= 3 distinct sizes")
    if not samples["gamma"]:
        raise ValueError("operation 'gamma' needs at least one measurement")

    def arrays(op: str) -> tuple[np.ndarray, np.ndarray]:
        ns = np.array([n for n, _ in samples[op]], dtype=np.float64)
        ys = np.array([y for _, y in samples[op]], dtype=np.float64)
        return ns, ys

    n_a, y_a = arrays("alpha")
    n_b, y_b = arrays("beta")
    n_d, y_d = arrays("delta")
    n_n, y_n = arrays("nu")
    gamma = max(float(np.mean([y for _, y in samples["gamma"]])), 0.0)
    return CostModel(
        alpha=_fit_clamped(n_a, y_a),
        beta=_fit_clamped(np.log2(np.maximum(n_b, 1.0)), y_b),
        gamma=gamma,
        delta=_fit_clamped(n_d, y_d),
        nu=_fit_clamped(n_n * np.log2(np.maximum(n_n, 2.0)), y_n),
    )


# -- predicted latency -------------------------------------------------------


def predicted_latency(node, model: CostModel) -> float:
    """Expected point-lookup cost of a shape under uniformly random keys.

    Partition nodes charge one descent plus the size-weighted child
    latency; Concat is searched left to right, so the left child is always
    paid and the right child is paid with the probability the key lives
    there.  Empty inner nodes cost nothing.
    """
    kind = node.kind
    if kind == "array":
        return model.alpha_ns(node.n)
    if kind == "sorted":
        return model.beta_ns(node.n)
    left = node.left.get()
    right = node.right.get()
    total = node.total
    if total == 0:
        return 0.0
    wl = left.total / total
    wr = right.total / total
    if kind == "bintree":
        return model.gamma_ns() + wl * predicted_latency(left, model) + wr * predicted_latency(right, model)
    return predicted_latency(left, model) + wr * predicted_latency(right, model)


def transform_cost_ns(model: CostModel, atomic: Atomic, node) -> float:
    """Modeled cost of applying ``atomic`` to ``node`` (pre-rewrite shape)."""
    if atomic is Atomic.SORT:
        return model.nu_ns(node.n)
    if atomic is Atomic.CRACK or atomic is Atomic.DIVIDE:
        return model.delta_ns(node.n)
    if atomic is Atomic.MERGE:
        out = node.left.get().n + node.right.get().n
        return model.delta_ns(out)
    return 0.0


# -- simulation ---------------------------------------------------------------


@dataclass(frozen=True)
class StatusInterval:
    """A stretch of simulated time with constant predicted performance."""

    start_s: float
    end_s: float
    latency_ns: float


def simulate(
    initial,
    score: ScoringFunction,
    model: CostModel,
    horizon_s: float,
) -> list[StatusInterval]:
    """Run the scheduler over light nodes, charging modeled transform costs.

    One interval is emitted per applied transform (covering the time the
    transform is being computed, at the pre-swap latency), plus a terminal
    interval extending to the horizon at the final latency.  The instance
    is reorganized in place; pass a fresh or cloned shape.
    """
    if horizon_s <= 0:
        raise ValueError("horizon must be positive")
    root = Handle(initial)
    scheduler = Scheduler(root, score, apply_fn=apply_light)
    cache: dict[int, float] = {}

    def latency_of(handle: Handle) -> float:
        ident = handle.identity
        got = cache.get(ident)
        if got is None:
            node = handle.get()
            kind = node.kind
            if kind == "array":
                got = model.alpha_ns(node.n)
            elif kind == "sorted":
                got = model.beta_ns(node.n)
            else:
                total = node.total
                if total == 0:
                    got = 0.0
                else:
                    ll = latency_of(node.left)
                    rl = latency_of(node.right)
                    wr = node.right.get().total / total
                    if kind == "bintree":
                        got = model.gamma_ns() + (node.left.get().total / total) * ll + wr * rl
                    else:
                        got = ll + wr * rl
            cache[ident] = got
        return got

    intervals: list[StatusInterval] = []
    now = 0.0
    while now < horizon_s:
        latency = latency_of(root)
        info = scheduler.step_info()
        if info is None:
            break
        cost_s = transform_cost_ns(model, info.atomic, info.old_node) * 1e-9
        intervals.append(StatusInterval(now, now + cost_s, latency))
        stale = info.handle
        while stale is not None:
            cache.pop(stale.identity, None)
            stale = scheduler.parents.get(stale.identity)
        for dead in info.destroyed:
            cache.pop(dead.identity, None)
        now += cost_s
    intervals.append(StatusInterval(now, max(horizon_s, now), latency_of(root)))
    return intervals


# -- utilities and the optimizer ----------------------------------------------


UtilityFunction = Callable[[Sequence[StatusInterval]], float]


def evaluate_utility(intervals: Sequence[StatusInterval], utility: UtilityFunction) -> float:
    if not intervals:
        raise ValueError("intervals must be nonempty")
    return utility(intervals)


def time_until_latency_below(limit_ns: float) -> UtilityFunction:
    """Earliest simulated time at which latency drops below the limit (inf if never)."""

    def utility(intervals: Sequence[StatusInterval]) -> float:
        for iv in intervals:
            if iv.latency_ns < limit_ns:
                return iv.start_s
        return math.inf

    return utility


def time_to_convergence(intervals: Sequence[StatusInterval]) -> float:
    """Start of the terminal interval: when the last transform completed."""
    return intervals[-1].start_s


def total_workload_time(queries: int, window_s: float) -> UtilityFunction:
    """Expected total seconds spent answering uniformly timed queries.

    ``queries`` lookups arrive uniformly over [0, window]; each costs the
    latency in force at its arrival.  The final interval extends past its
    recorded end for this purpose.
    """

    def utility(intervals: Sequence[StatusInterval]) -> float:
        acc_ns = 0.0
        for i, iv in enumerate(intervals):
            hi = window_s if i == len(intervals) - 1 else min(iv.end_s, window_s)
            lo = min(iv.start_s, window_s)
            if hi > lo:
                acc_ns += iv.latency_ns * (hi - lo)
        return (queries / window_s) * acc_ns * 1e-9

    return utility


def optimize_policy(
    utility: UtilityFunction,
    model: CostModel,
    initial,
    candidates: Optional[Iterable[int]] = None,
    theta_range: Optional[tuple[int, int]] = None,
    horizon_s: float = math.inf,
) -> int:
    """Pick the crack threshold that minimizes a utility.

    A finite candidate set is evaluated exhaustively (ties go to the
    smaller threshold).  For a (lo, hi) range the utility is piecewise
    constant in the threshold, so instead of gradient descent we run a
    derivative-free golden-section search over log2(theta), returning the
    best threshold evaluated once the bracket narrows below half a step of
    the 2x geometric grid.
    """
    evaluated: dict[int, float] = {}

    def cost(theta: int) -> float:
        theta = int(theta)
        if theta not in evaluated:
            intervals = simulate(
                clone_light(initial), score_crack_sort_merge(theta), model, horizon_s
            )
            evaluated[theta] = utility(intervals)
        return evaluated[theta]

    if candidates is not None:
        pool = sorted({int(c) for c in candidates})
        if not pool:
            raise ValueError("candidate set must be nonempty")
        return min(pool, key=cost)

    if theta_range is None:
        raise ValueError("either candidates or theta_range is required")
    lo, hi = theta_range
    if lo < 2 or hi < lo:
        raise ValueError("theta range must satisfy 2 <= lo <= hi")
    if lo == hi:
        cost(lo)
        return lo

    def theta_at(x: float) -> int:
        return max(lo, min(hi, int(round(2.0**x))))

    a = math.log2(lo)
    b = math.log2(hi)
    cost(lo)
    cost(hi)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    while b - a > 0.5:
        if cost(theta_at(c)) <= cost(theta_at(d)):
            b, d = d, c
            c = b - invphi * (b - a)
        else:
            a, c = c, d
            d = a + invphi * (b - a)
    return min(sorted(evaluated), key=lambda th: evaluated[th])
