"""Chart rendering for benchmark timeline CSVs.

Consumes the bench harness's delimited output
(``elapsed_s,transforms,latency_ns,policy,p50_ns,p99_ns``) and renders
static performance-over-time images: one line per policy label, elapsed
seconds on x, latency on a log-scaled y.  Measured series draw solid;
predicted series (labels ending in ``-sim``) draw dashed so the two
overlay cleanly.
"""

from .plotting import PlotSpec, SchemaError, TimelinePoint, plot_timeline, read_timeline_csv

__all__ = [
    "PlotSpec",
    "SchemaError",
    "TimelinePoint",
    "plot_timeline",
    "read_timeline_csv",
]

__version__ = "0.1.0"
