"""Benchmark harness: data generation, microbenchmarks, and timelines.

Synchronous timelines follow a staged protocol: apply a batch of scheduler
steps, pause, measure query latency, emit a row.  Reported elapsed time
counts only reorganization (transform application plus transform
selection), never measurement.  Concurrent timelines run the worker freely
and sample latency from a client thread roughly once per second.  Every
sample point interleaves a correctness spot check of random lookups
against a flat-map oracle.

CSV rows follow the fixed schema
``elapsed_s,transforms,latency_ns,policy,p50_ns,p99_ns``.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import KEY_MAX, KEY_MIN, ArrayNode, SortedNode, BinTreeNode, Handle
from .policy import score_crack_sort_merge
from .runtime import Index, get_record
from .simulator import CostModel, LightArray, fit_cost_model, simulate
from .transforms import Atomic, apply_atomic

CSV_FIELDS = ("elapsed_s", "transforms", "latency_ns", "policy", "p50_ns", "p99_ns")

DEFAULT_POINT_QUERIES = 1000
DEFAULT_RANGE_QUERIES = 50
DEFAULT_RANGE_SPAN = 1000


@dataclass
class BenchConfig:
    records: int = 10**6
    seed: int = 7
    thetas: tuple[int, ...] = (1000,)
    mode: str = "sync"  # sync | concurrent
    workload: str = "point"  # point | range
    queries_per_sample: Optional[int] = None
    range_span: int = DEFAULT_RANGE_SPAN
    sample_every: Optional[int] = None
    spot_checks: int = 100

    def __post_init__(self):
        if self.records < 1:
            raise ValueError("records must be >= 1")
        if self.mode not in ("sync", "concurrent"):
            raise ValueError(f"unknown mode: {self.mode!r}")
        if self.workload not in ("point", "range"):
            raise ValueError(f"unknown workload: {self.workload!r}")
        if not self.thetas:
            raise ValueError("at least one theta is required")
        for theta in self.thetas:
            if theta < 2:
                raise ValueError("theta must be >= 2")

    @property
    def queries(self) -> int:
        if self.queries_per_sample is not None:
            return self.queries_per_sample
        return DEFAULT_POINT_QUERIES if self.workload == "point" else DEFAULT_RANGE_QUERIES


@dataclass
class SampleRow:
    elapsed_s: float
    transforms: int
    latency_ns: float
    policy: str
    p50_ns: float
    p99_ns: float


@dataclass
class TimelineResult:
    rows: list[SampleRow]
    trace: list[tuple[str, int]]
    converged: bool
    time_to_convergence_s: float
    converged_latency_ns: float


def generate_data(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """n records with keys and values drawn uniformly from the full int64 range."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    keys = rng.integers(KEY_MIN, KEY_MAX, size=n, dtype=np.int64, endpoint=True)
    values = rng.integers(KEY_MIN, KEY_MAX, size=n, dtype=np.int64, endpoint=True)
    return keys, values


class FlatMapOracle:
    """Hash-map reference for membership and value checks."""

    def __init__(self, keys: np.ndarray, values: np.ndarray):
        table: dict[int, list[int]] = {}
        for k, v in zip(keys.tolist(), values.tolist()):
            table.setdefault(k, []).append(v)
        self.table = table

    def extend(self, keys, values) -> None:
        for k, v in zip(np.asarray(keys).tolist(), np.asarray(values).tolist()):
            self.table.setdefault(k, []).append(v)

    def check_get(self, index: Index, key: int) -> bool:
        rec = index.get(key)
        expected = self.table.get(int(key))
        if expected is None:
            return rec is None
        return rec is not None and rec.key == key and rec.value in expected


def spot_check(index: Index, oracle: FlatMapOracle, rng: np.random.Generator,
               count: int, data_keys: np.ndarray) -> None:
    """Validate random lookups (half present, half arbitrary) against the oracle."""
    if count <= 0:
        return
    present = rng.choice(data_keys, size=(count + 1) // 2)
    arbitrary = rng.integers(KEY_MIN, KEY_MAX, size=count // 2, dtype=np.int64, endpoint=True)
    for key in np.concatenate([present, arbitrary]).tolist():
        if not oracle.check_get(index, key):
            raise AssertionError(f"lookup mismatch against oracle for key {key}")


# -- latency measurement -------------------------------------------------------


def _measure_point(index: Index, query_keys: Sequence[int]) -> tuple[float, float, float]:
    lat = np.empty(len(query_keys), dtype=np.float64)
    for i, key in enumerate(query_keys):
        t0 = time.perf_counter_ns()
        index.get(key)
        lat[i] = time.perf_counter_ns() - t0
    return float(lat.mean()), float(np.percentile(lat, 50)), float(np.percentile(lat, 99))


def _measure_range(index: Index, starts: Sequence[int], span: int) -> tuple[float, float, float]:
    lat = np.empty(len(starts), dtype=np.float64)
    for i, start in enumerate(starts):
        t0 = time.perf_counter_ns()
        it = index.ordered_iterator(lower=start)
        taken = 0
        for _ in it:
            taken += 1
            if taken >= span:
                break
        lat[i] = time.perf_counter_ns() - t0
    return float(lat.mean()), float(np.percentile(lat, 50)), float(np.percentile(lat, 99))


def _measure(index: Index, config: BenchConfig, rng: np.random.Generator,
             data_keys: np.ndarray) -> tuple[float, float, float]:
    queries = rng.choice(data_keys, size=config.queries).tolist()
    if config.workload == "point":
        return _measure_point(index, queries)
    return _measure_range(index, queries, config.range_span)


def _estimate_total_steps(n: int, theta: int) -> int:
    leaves = 1
    size = n
    while size >= theta and size >= 2:
        leaves *= 2
        size = (size + 1) // 2
    return 3 * leaves


def _target_size(info) -> int:
    node = info.old_node
    if node.kind in ("array", "sorted"):
        return node.n
    return node.left.get().n + node.right.get().n


# -- timelines -------------------------------------------------------------------


def run_timeline(config: BenchConfig, theta: Optional[int] = None,
                 data: Optional[tuple[np.ndarray, np.ndarray]] = None,
                 index: Optional[Index] = None) -> TimelineResult:
    """One policy run producing performance-over-time rows.

    ``index`` lets callers time a prebuilt (e.g. partially organized)
    index; it must hold exactly the records in ``data``.
    """
    theta = theta if theta is not None else config.thetas[0]
    keys, values = data if data is not None else generate_data(config.records, config.seed)
    oracle = FlatMapOracle(keys, values)
    if index is None:
        index = Index(keys, values, theta=theta)
    label = f"theta={theta}"
    rng = np.random.default_rng(config.seed + 1)
    if config.mode == "sync":
        return _run_sync(config, index, oracle, keys, rng, label)
    return _run_concurrent(config, index, oracle, keys, rng, label)


def _run_sync(config, index, oracle, data_keys, rng, label) -> TimelineResult:
    scheduler = index.scheduler
    if index.root is not scheduler.root:
        scheduler.sync_root(index.root)  # prebuilt index with pending inserts
    batch = config.sample_every or max(1, _estimate_total_steps(config.records, index.theta) // 50)
    rows: list[SampleRow] = []
    trace: list[tuple[str, int]] = []
    reorg_s = 0.0
    transforms = 0
    while True:
        mean, p50, p99 = _measure(index, config, rng, data_keys)
        spot_check(index, oracle, rng, config.spot_checks, data_keys)
        rows.append(SampleRow(reorg_s, transforms, mean, label, p50, p99))
        t0 = time.perf_counter()
        done = 0
        while done < batch:
            info = scheduler.step_info()
            if info is None:
                break
            trace.append((info.atomic.value, _target_size(info)))
            done += 1
        reorg_s += time.perf_counter() - t0
        if done == 0:
            break
        transforms += done
    return TimelineResult(
        rows=rows,
        trace=trace,
        converged=index.converged,
        time_to_convergence_s=rows[-1].elapsed_s,
        converged_latency_ns=rows[-1].latency_ns,
    )


def _run_concurrent(config, index, oracle, data_keys, rng, label) -> TimelineResult:
    index.start_worker()
    started = time.monotonic()
    rows: list[SampleRow] = []
    try:
        while True:
            final = index.converged
            mean, p50, p99 = _measure(index, config, rng, data_keys)
            spot_check(index, oracle, rng, config.spot_checks, data_keys)
            rows.append(SampleRow(
                time.monotonic() - started, index.scheduler.steps, mean, label, p50, p99,
            ))
            if final:
                break
            # Sampling cadence: roughly once per second; returns early if
            # the worker converges while we wait.
            wake = started + math.ceil(time.monotonic() - started + 1e-9)
            pause = wake - time.monotonic()
            if pause > 0:
                index.wait_converged(pause)
    finally:
        index.stop_worker()
    return TimelineResult(
        rows=rows,
        trace=[],
        converged=index.converged,
        time_to_convergence_s=rows[-1].elapsed_s,
        converged_latency_ns=rows[-1].latency_ns,
    )


def run_compare(config: BenchConfig, thetas: Optional[Sequence[int]] = None,
                data: Optional[tuple[np.ndarray, np.ndarray]] = None) -> dict[int, TimelineResult]:
    """One timeline per threshold over identical generated data."""
    thetas = tuple(thetas) if thetas is not None else config.thetas
    if len(thetas) < 2:
        raise ValueError("compare needs at least two thetas")
    if data is None:
        data = generate_data(config.records, config.seed)
    return {theta: run_timeline(config, theta, data) for theta in thetas}


def run_simulate(config: BenchConfig, model_path) -> list[SampleRow]:
    """Predicted timelines in the measured CSV schema, labels suffixed ``-sim``."""
    model = CostModel.load(model_path)
    rows: list[SampleRow] = []
    for theta in config.thetas:
        intervals = simulate(
            LightArray(config.records), score_crack_sort_merge(theta), model, math.inf
        )
        label = f"theta={theta}-sim"
        for i, iv in enumerate(intervals):
            rows.append(SampleRow(iv.start_s, i, iv.latency_ns, label, iv.latency_ns, iv.latency_ns))
    return rows


# -- CSV -------------------------------------------------------------------------


def write_csv(path, rows: Sequence[SampleRow]) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_FIELDS)
            for row in rows:
                writer.writerow([
                    f"{row.elapsed_s:.9f}", row.transforms, f"{row.latency_ns:.3f}",
                    row.policy, f"{row.p50_ns:.3f}", f"{row.p99_ns:.3f}",
                ])
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def read_csv(path) -> list[SampleRow]:
    rows: list[SampleRow] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header[: len(CSV_FIELDS)]) != CSV_FIELDS:
            raise ValueError(f"{path}: unexpected CSV header {header!r}")
        for lineno, rec in enumerate(reader, start=2):
            try:
                rows.append(SampleRow(
                    float(rec[0]), int(rec[1]), float(rec[2]), rec[3],
                    float(rec[4]), float(rec[5]),
                ))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}, line {lineno}: malformed row {rec!r}") from exc
    return rows


# -- microbenchmark ----------------------------------------------------------------


DEFAULT_MICROBENCH_SIZES = tuple(2**e for e in range(10, 25, 2))


def _time_block(fn, repeat: int, retain: bool = False) -> float:
    # Retaining results keeps allocator behavior close to the engine, where
    # transform outputs stay alive as tree nodes instead of being recycled.
    kept = []
    t0 = time.perf_counter_ns()
    if retain:
        for _ in range(repeat):
            kept.append(fn())
    else:
        for _ in range(repeat):
            fn()
    per = (time.perf_counter_ns() - t0) / repeat
    del kept
    return per


def _bintree_chain(depth: int) -> tuple[Handle, int]:
    """Right-descending chain of partition nodes; returns (root, probe key)."""
    node = ArrayNode([depth + 1], [0])
    for level in range(depth, 0, -1):
        node = BinTreeNode(level, Handle(ArrayNode([level - 1], [0])), Handle(node))
    return Handle(node), depth + 1


def run_microbench(out_path=None, sizes: Sequence[int] = DEFAULT_MICROBENCH_SIZES,
                   trials: int = 3, seed: int = 1234) -> CostModel:
    """Time lookups and transforms across sizes; fit and optionally save the model.

    Measures the same code paths the index executes: ``get_record`` on leaf
    nodes and ``apply_atomic`` for crack and sort.  Trials interleave
    across sizes so a noisy stretch of machine time cannot poison one size
    wholesale, and the fit consumes per-size medians.
    """
    rng = np.random.default_rng(seed)
    leaves = {}
    for n in sizes:
        keys = rng.integers(KEY_MIN, KEY_MAX, size=n, dtype=np.int64, endpoint=True)
        values = np.zeros(n, dtype=np.int64)
        array_leaf = ArrayNode(keys, values)
        sorted_leaf = SortedNode(np.sort(keys), values)
        # Warm up: touch pages and code paths before the timed calls.
        apply_atomic(Atomic.CRACK, array_leaf)
        apply_atomic(Atomic.SORT, array_leaf)
        probes = rng.choice(keys, size=16).tolist()
        get_record(array_leaf, probes[0])
        leaves[n] = (array_leaf, sorted_leaf, probes)

    raw: dict[tuple[str, int], list[float]] = {}

    def record(op: str, n: int, ns: float) -> None:
        raw.setdefault((op, n), []).append(ns)

    for trial in range(max(trials, 2)):
        for n in sizes:
            array_leaf, sorted_leaf, probes = leaves[n]
            probe = probes[(trial * 7) % len(probes)]
            scan_reps = max(1, min(64, 2**21 // n))
            transform_reps = max(1, min(256, 2**22 // n))
            record("alpha", n, _time_block(lambda: get_record(array_leaf, probe), scan_reps))
            record("beta", n, _time_block(lambda: get_record(sorted_leaf, probe), 200))
            record("delta", n, _time_block(
                lambda: apply_atomic(Atomic.CRACK, array_leaf), transform_reps, retain=True))
            record("nu", n, _time_block(
                lambda: apply_atomic(Atomic.SORT, array_leaf), transform_reps, retain=True))
        shallow, shallow_key = _bintree_chain(8)
        deep, deep_key = _bintree_chain(40)
        t_shallow = _time_block(lambda: get_record(shallow.get(), shallow_key), 400)
        t_deep = _time_block(lambda: get_record(deep.get(), deep_key), 400)
        record("gamma", 1, max((t_deep - t_shallow) / 32.0, 0.0))

    samples = [(op, n, float(np.median(vals))) for (op, n), vals in raw.items()]
    model = fit_cost_model(samples)
    if out_path is not None:
        model.save(out_path)
    return model
