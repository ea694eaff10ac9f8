"""Command-line benchmark harness.

Subcommands:
  microbench  time primitive operations and write a fitted cost-model file
  timeline    measured performance-over-time run(s), CSV output
  compare     timelines for two or more thresholds over identical data
  simulate    predicted timelines from a cost-model file, same CSV schema
"""

from __future__ import annotations

import argparse
import sys

from .bench import (
    BenchConfig,
    run_compare,
    run_microbench,
    run_simulate,
    run_timeline,
    write_csv,
)


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--records", type=int, default=10**6, help="record count (default 1e6)")
    parser.add_argument("--seed", type=int, default=7, help="data generation seed")
    parser.add_argument("--theta", type=int, action="append",
                        help="crack threshold; repeat the flag to run several")
    parser.add_argument("--mode", choices=("sync", "concurrent"), default="sync")
    parser.add_argument("--workload", choices=("point", "range"), default="point")
    parser.add_argument("--queries", type=int, default=None,
                        help="queries per sample (default: 1000 point / 50 range)")
    parser.add_argument("--range-span", type=int, default=1000,
                        help="records visited per range scan")
    parser.add_argument("--sample-every", type=int, default=None,
                        help="scheduler steps between samples (default: ~50 samples)")
    parser.add_argument("--out", required=True, help="output CSV path")


def _config(args, default_thetas=(1000,)) -> BenchConfig:
    thetas = tuple(args.theta) if args.theta else tuple(default_thetas)
    return BenchConfig(
        records=args.records,
        seed=args.seed,
        thetas=thetas,
        mode=args.mode,
        workload=args.workload,
        queries_per_sample=args.queries,
        range_span=args.range_span,
        sample_every=args.sample_every,
    )


def _cmd_microbench(args) -> int:
    sizes = tuple(2**e for e in range(args.min_exp, args.max_exp + 1, 2))
    model = run_microbench(args.out, sizes=sizes, trials=args.trials, seed=args.seed)
    print(f"wrote cost model to {args.out}")
    print(f"  alpha={model.alpha} beta={model.beta} gamma={model.gamma:.1f} "
          f"delta={model.delta} nu={model.nu}")
    return 0


def _cmd_timeline(args) -> int:
    config = _config(args)
    rows = []
    for theta in config.thetas:
        result = run_timeline(config, theta)
        rows.extend(result.rows)
        clock = "reorganization time" if config.mode == "sync" else "wall time"
        print(f"theta={theta}: {result.rows[-1].transforms} transforms, "
              f"converged in {result.time_to_convergence_s:.3f}s {clock}")
    if args.sim:
        if not args.model:
            raise ValueError("--sim requires --model FILE")
        rows.extend(run_simulate(config, args.model))
    write_csv(args.out, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_compare(args) -> int:
    config = _config(args)
    if len(config.thetas) < 2:
        raise ValueError("compare needs --theta given at least twice")
    results = run_compare(config)
    rows = []
    for theta, result in results.items():
        rows.extend(result.rows)
        print(f"theta={theta}: converged in {result.time_to_convergence_s:.3f}s, "
              f"final latency {result.converged_latency_ns:.0f}ns")
    if args.sim:
        if not args.model:
            raise ValueError("--sim requires --model FILE")
        rows.extend(run_simulate(config, args.model))
    write_csv(args.out, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    config = _config(args)
    rows = run_simulate(config, args.model)
    write_csv(args.out, rows)
    print(f"wrote {len(rows)} predicted rows to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="morphindex-bench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("microbench", help="fit a cost model from timing runs")
    p.add_argument("--out", required=True, help="cost model output path")
    p.add_argument("--min-exp", type=int, default=10, help="smallest size as a power of two")
    p.add_argument("--max-exp", type=int, default=24, help="largest size as a power of two")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--seed", type=int, default=1234)
    p.set_defaults(fn=_cmd_microbench)

    p = sub.add_parser("timeline", help="measured performance-over-time run")
    _add_run_flags(p)
    p.add_argument("--sim", action="store_true", help="append predicted rows (needs --model)")
    p.add_argument("--model", default=None, help="cost model file for --sim")
    p.set_defaults(fn=_cmd_timeline)

    p = sub.add_parser("compare", help="timelines for several thresholds, same data")
    _add_run_flags(p)
    p.add_argument("--sim", action="store_true", help="append predicted rows (needs --model)")
    p.add_argument("--model", default=None, help="cost model file for --sim")
    p.set_defaults(fn=_cmd_compare)

    p = sub.add_parser("simulate", help="predicted timelines from a cost model")
    _add_run_flags(p)
    p.add_argument("--model", required=True, help="cost model file")
    p.set_defaults(fn=_cmd_simulate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
