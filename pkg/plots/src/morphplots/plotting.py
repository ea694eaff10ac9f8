from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

EXPECTED_HEADER = ("elapsed_s", "transforms", "latency_ns", "policy", "p50_ns", "p99_ns")

SIM_SUFFIX = "-sim"


class SchemaError(ValueError):
    """A CSV file does not match the benchmark timeline schema."""


@dataclass(frozen=True)
class TimelinePoint:
    elapsed_s: float
    transforms: int
    latency_ns: float
    policy: str
    p50_ns: float
    p99_ns: float


@dataclass
class PlotSpec:
    inputs: Sequence[str]
    output: str
    log_x: bool = False
    log_y: bool = True
    group_column: str = "policy"
    title: str | None = None


def read_timeline_csv(path) -> list[TimelinePoint]:
    """Parse one timeline CSV strictly; schema problems name file and line."""
    points: list[TimelinePoint] = []
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"{path}: cannot open ({exc})") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(header) != EXPECTED_HEADER:
            raise SchemaError(
                f"{path}, line 1: expected header {','.join(EXPECTED_HEADER)!r}, "
                f"got {header!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(EXPECTED_HEADER):
                raise SchemaError(
                    f"{path}, line {lineno}: expected {len(EXPECTED_HEADER)} fields, "
                    f"got {len(row)}"
                )
            try:
                points.append(TimelinePoint(
                    elapsed_s=float(row[0]),
                    transforms=int(row[1]),
                    latency_ns=float(row[2]),
                    policy=row[3],
                    p50_ns=float(row[4]),
                    p99_ns=float(row[5]),
                ))
            except ValueError as exc:
                raise SchemaError(f"{path}, line {lineno}: malformed row {row!r}") from exc
    return points


def _series_style(policy: str, color_cycle: dict[str, str]):
    base = policy[: -len(SIM_SUFFIX)] if policy.endswith(SIM_SUFFIX) else policy
    if base not in color_cycle:
        palette = plt.rcParams["axes.prop_cycle"].by_key()["color"]
        color_cycle[base] = palette[len(color_cycle) % len(palette)]
    dashed = policy.endswith(SIM_SUFFIX)
    return {
        "color": color_cycle[base],
        "linestyle": "--" if dashed else "-",
        "marker": "x" if dashed else ".",
    }


def plot_timeline(spec: PlotSpec) -> int:
    """Render the chart; returns the number of plotted points.

    Rows are plotted exactly as read: no resampling, no reordering beyond
    grouping by the policy label, so the plotted point count equals the
    input row count.
    """
    all_points: list[TimelinePoint] = []
    for path in spec.inputs:
        all_points.extend(read_timeline_csv(path))
    if not all_points:
        raise SchemaError("no data rows found in the given files")

    series: dict[str, list[TimelinePoint]] = {}
    for point in all_points:
        series.setdefault(getattr(point, spec.group_column), []).append(point)

    fig, ax = plt.subplots(figsize=(8, 5))
    color_cycle: dict[str, str] = {}
    for policy in sorted(series):
        pts = series[policy]
        ax.plot(
            [p.elapsed_s for p in pts],
            [p.latency_ns for p in pts],
            label=policy,
            linewidth=1.4,
            markersize=4,
            **_series_style(policy, color_cycle),
        )
    if spec.log_x:
        ax.set_xscale("log")
    if spec.log_y:
        ax.set_yscale("log")
    ax.set_xlabel("elapsed (s)")
    ax.set_ylabel("latency (ns)")
    ax.set_title(spec.title or "Lookup latency over reorganization time")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    output = Path(spec.output)
    if output.parent and not output.parent.exists():
        output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return len(all_points)
