"""Latency/throughput statistics: the six per-cell indicators.

Percentiles are nearest-rank (the sorted sample at 1-based index
ceil(p/100 * n)), so every reported value is an actual sample. Peak
throughput is the max over 1-second sliding windows of completions in the
window times batch size; runs shorter than one window fall back to the
whole-run rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from modelci.errors import EmptySamples
from modelci.profiler.types import ProfilingResult


@dataclass
class LatencySamples:
    """Per-request wall times plus completion instants for one cell.

    completions_ms are measured from the start of the measurement window,
    so the last value doubles as the run duration.
    """

    latencies_ms: list[float]
    completions_ms: list[float]
    failed: int = 0

    def total(self) -> int:
        return len(self.latencies_ms) + self.failed

    def failure_fraction(self) -> float:
        total = self.total()
        return (self.failed / total) if total else 0.0


@dataclass
class ResourceSample:
    """One instance-resource reading inside the measurement window."""

    t_ms: float
    cpu_fraction: float
    memory_bytes: float


def _rank(p, n: int) -> int:
    """1-based nearest-rank index: ceil(p/100 * n), exact for decimal p."""
    if isinstance(p, float):
        if p.is_integer():
            p = int(p)
        else:
            # interpret the float by its decimal spelling, not its binary
            # expansion, so percentile(s, 97.5) means exactly 97.5
            p = Fraction(str(p))
    return math.ceil(Fraction(p) * n / 100)


def percentile(samples: Sequence[float], p) -> float:
    """Nearest-rank percentile; samples need not be pre-sorted."""
    if not samples:
        raise EmptySamples("percentile of no samples")
    if not 0 < p <= 100:
        raise ValueError(f"percentile p must be in (0, 100], got {p}")
    ordered = sorted(samples)
    return ordered[_rank(p, len(ordered)) - 1]


def peak_throughput(completions_ms: Sequence[float], batch_size: int,
                    window_ms: int = 1000) -> float:
    """Max samples/s over sliding windows of width window_ms.

    Windows are half-open [t, t + window_ms); the maximum over all window
    positions is attained with the left edge on a completion, so only those
    positions are scanned. Runs shorter than one window use the whole-run
    rate instead.
    """
    if not completions_ms:
        raise EmptySamples("throughput of no completions")
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    if window_ms <= 0:
        raise ValueError("window_ms must be positive")
    ts = sorted(completions_ms)
    duration_ms = ts[-1]
    if duration_ms <= 0:
        raise ValueError("completion timestamps must be positive (ms since run start)")
    n = len(ts)
    if duration_ms < window_ms:
        return n * batch_size * 1000 / duration_ms
    best = 0
    j = 0
    for i in range(n):
        limit = ts[i] + window_ms
        if j < i:
            j = i
        while j < n and ts[j] < limit:
            j += 1
        if j - i > best:
            best = j - i
    return best * batch_size * 1000 / window_ms


def aggregate(samples: LatencySamples, resource_trace: Sequence[ResourceSample],
              batch_size: int, *, variant_id: str, device: str, backend: str,
              protocol: str, window_ms: int = 1000,
              resource_scope: str = "process") -> ProfilingResult:
    """Fold one cell's measurements into the six indicators.

    An empty resource trace still produces a result: memory/utilization are
    left unknown (None) and the result is flagged degraded.
    """
    if not samples.latencies_ms:
        raise EmptySamples("cannot aggregate a cell with no successful requests")
    ordered = sorted(samples.latencies_ms)
    memory: Optional[float] = None
    utilization: Optional[float] = None
    degraded = True
    if resource_trace:
        memory = max(s.memory_bytes for s in resource_trace)
        utilization = sum(s.cpu_fraction for s in resource_trace) / len(resource_trace)
        degraded = False
    return ProfilingResult(
        variant_id=variant_id,
        device=device,
        backend=backend,
        protocol=protocol,
        batch_size=batch_size,
        peak_throughput=peak_throughput(samples.completions_ms, batch_size, window_ms),
        p50_latency_ms=percentile(ordered, 50),
        p95_latency_ms=percentile(ordered, 95),
        p99_latency_ms=percentile(ordered, 99),
        memory_bytes=memory,
        utilization=utilization,
        raw_sample_count=len(ordered),
        degraded=degraded,
        resource_scope=resource_scope,
    )
