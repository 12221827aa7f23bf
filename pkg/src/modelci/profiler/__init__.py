from modelci.profiler.stats import aggregate, peak_throughput, percentile
from modelci.profiler.types import Cell, ProfilingJob, ProfilingResult, SweepSpec

__all__ = [
    "aggregate",
    "peak_throughput",
    "percentile",
    "Cell",
    "ProfilingJob",
    "ProfilingResult",
    "SweepSpec",
]
