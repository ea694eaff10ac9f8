from __future__ import annotations

import numpy as np
import pytest

from morphindex.bench import (
    BenchConfig,
    FlatMapOracle,
    SampleRow,
    generate_data,
    read_csv,
    run_compare,
    run_microbench,
    run_simulate,
    run_timeline,
    write_csv,
    CSV_FIELDS,
)
from morphindex.core import SortedNode
from morphindex.runtime import Index
from morphindex.simulator import CostModel

QUICK_SIZES = tuple(2**e for e in range(10, 17, 2))


def quick_config(**overrides):
    defaults = dict(records=20000, seed=3, thetas=(500,), queries_per_sample=40,
                    spot_checks=10)
    defaults.update(overrides)
    return BenchConfig(**defaults)


# -- data generation ---------------------------------------------------------------


def test_generate_data_is_deterministic():
    k1, v1 = generate_data(5, seed=42)
    k2, v2 = generate_data(5, seed=42)
    assert np.array_equal(k1, k2) and np.array_equal(v1, v2)
    k3, _ = generate_data(5, seed=43)
    assert not np.array_equal(k1, k3)


def test_generate_data_size_and_dtype():
    keys, values = generate_data(10**5, seed=1)
    assert len(keys) == len(values) == 10**5
    assert keys.dtype == np.int64


def test_generate_data_buckets_roughly_uniform():
    n = 10**6
    keys, _ = generate_data(n, seed=9)
    buckets = np.bincount(((keys >> 60) + 8).astype(np.int64), minlength=16)
    expected = n / 16
    assert len(buckets) == 16
    assert np.all(np.abs(buckets - expected) <= 0.05 * expected)


def test_generate_data_rejects_zero():
    with pytest.raises(ValueError):
        generate_data(0, seed=1)


# -- config -------------------------------------------------------------------------


def test_config_defaults_per_workload():
    assert BenchConfig(workload="point").queries == 1000
    assert BenchConfig(workload="range").queries == 50
    assert BenchConfig(workload="range").range_span == 1000


def test_config_validation():
    with pytest.raises(ValueError):
        BenchConfig(records=0)
    with pytest.raises(ValueError):
        BenchConfig(mode="warp")
    with pytest.raises(ValueError):
        BenchConfig(thetas=())
    with pytest.raises(ValueError):
        BenchConfig(thetas=(1,))


# -- timelines ------------------------------------------------------------------------


def test_sync_timeline_rows_and_convergence():
    result = run_timeline(quick_config())
    rows = result.rows
    assert result.converged
    assert rows[0].transforms == 0 and rows[0].elapsed_s == 0.0
    assert all(r.latency_ns > 0 for r in rows)
    elapsed = [r.elapsed_s for r in rows]
    assert all(b > a for a, b in zip(elapsed, elapsed[1:]))
    transforms = [r.transforms for r in rows]
    assert all(b >= a for a, b in zip(transforms, transforms[1:]))
    assert rows[-1].policy == "theta=500"


def test_sync_timeline_converged_index_single_row():
    config = quick_config(records=100)
    keys, values = generate_data(100, seed=3)
    order = np.argsort(keys, kind="stable")
    index = Index.from_node(SortedNode(keys[order], values[order]), theta=500)
    result = run_timeline(config, theta=500, data=(keys, values), index=index)
    assert len(result.rows) == 1
    assert result.converged


def test_sync_timeline_structural_trace_is_deterministic():
    a = run_timeline(quick_config())
    b = run_timeline(quick_config())
    assert a.trace == b.trace
    assert [r.transforms for r in a.rows] == [r.transforms for r in b.rows]
    assert repr(a.trace) == repr(b.trace)


def test_range_workload_timeline_organizes_via_scans():
    config = quick_config(records=5000, thetas=(250,), workload="range",
                          queries_per_sample=5, range_span=100)
    result = run_timeline(config)
    assert result.converged
    assert all(r.latency_ns > 0 for r in result.rows)
    # The first scan of the fresh single-leaf index sorts it outright, so
    # the policy has nothing left to do and the timeline is one row.
    assert len(result.rows) == 1
    assert result.rows[0].transforms == 0


def test_concurrent_timeline_converges_and_samples():
    config = quick_config(records=120000, thetas=(400,), mode="concurrent",
                          queries_per_sample=30)
    result = run_timeline(config)
    assert result.converged
    assert len(result.rows) >= 1
    assert all(r.latency_ns > 0 for r in result.rows)
    elapsed = [r.elapsed_s for r in result.rows]
    assert all(b >= a for a, b in zip(elapsed, elapsed[1:]))


def test_compare_requires_two_thetas():
    with pytest.raises(ValueError):
        run_compare(quick_config())


def test_compare_runs_each_theta_on_identical_data():
    config = quick_config(records=8000, thetas=(200, 9000))
    results = run_compare(config)
    assert set(results) == {200, 9000}
    # theta above n sorts in very few steps; cracking takes more
    assert results[200].rows[-1].transforms > results[9000].rows[-1].transforms
    for theta, result in results.items():
        assert result.converged
        assert result.rows[-1].policy == f"theta={theta}"


# -- CSV ---------------------------------------------------------------------------


def test_csv_round_trip(tmp_path):
    rows = [
        SampleRow(0.0, 0, 123.4, "theta=10", 100.0, 150.0),
        SampleRow(1.5, 42, 56.7, "theta=10", 50.0, 60.0),
    ]
    path = tmp_path / "out.csv"
    write_csv(path, rows)
    text = path.read_text().splitlines()
    assert text[0].startswith("elapsed_s,transforms,latency_ns,policy")
    back = read_csv(path)
    assert [r.policy for r in back] == ["theta=10", "theta=10"]
    assert back[1].transforms == 42
    assert back[1].elapsed_s == pytest.approx(1.5)


def test_csv_read_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("nope,nope\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        read_csv(path)


def test_csv_read_reports_line_numbers(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(",".join(CSV_FIELDS) + "\n0.0,zero,1.0,p,1.0,1.0\n")
    with pytest.raises(ValueError, match="line 2"):
        read_csv(path)


# -- microbench and simulation ---------------------------------------------------------


@pytest.fixture(scope="module")
def quick_model(tmp_path_factory):
    path = tmp_path_factory.mktemp("model") / "model.txt"
    model = run_microbench(path, sizes=QUICK_SIZES, trials=2)
    return path, model


def test_microbench_round_trip_and_nonnegative(quick_model):
    path, model = quick_model
    loaded = CostModel.load(path)
    assert loaded == model
    for pair in (model.alpha, model.beta, model.delta, model.nu):
        assert pair[0] >= 0 and pair[1] >= 0
    assert model.gamma >= 0


def test_microbench_linear_beats_log_at_scale(quick_model):
    _, model = quick_model
    n = 2**20
    assert model.alpha_ns(n) > model.beta_ns(n)


def test_microbench_sorting_costs_more_than_cracking(quick_model):
    _, model = quick_model
    n = 2**20
    assert model.nu_ns(n) > model.delta_ns(n)


def test_run_simulate_schema_matches_measured(quick_model, tmp_path):
    path, _ = quick_model
    config = quick_config(records=4096, thetas=(64,))
    rows = run_simulate(config, path)
    assert all(r.policy == "theta=64-sim" for r in rows)
    out = tmp_path / "sim.csv"
    write_csv(out, rows)
    back = read_csv(out)
    assert len(back) == len(rows)
    assert back[0].transforms == 0
    elapsed = [r.elapsed_s for r in back]
    assert all(b >= a for a, b in zip(elapsed, elapsed[1:]))


def test_run_simulate_missing_model_file(tmp_path):
    config = quick_config(records=128, thetas=(8,))
    with pytest.raises(FileNotFoundError, match="absent.txt"):
        run_simulate(config, tmp_path / "absent.txt")


# -- oracle -------------------------------------------------------------------------


def test_flat_map_oracle_checks_membership():
    keys = np.array([1, 1, 2], dtype=np.int64)
    values = np.array([10, 11, 20], dtype=np.int64)
    oracle = FlatMapOracle(keys, values)
    index = Index(keys, values)
    assert oracle.check_get(index, 1)
    assert oracle.check_get(index, 2)
    assert oracle.check_get(index, 3)  # absent on both sides
